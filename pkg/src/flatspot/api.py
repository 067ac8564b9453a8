"""HTTP service exposing the experiment pipelines.

Each endpoint takes a RunConfig and returns the corresponding response
model; the CLI drives the same service functions in-process.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .geometry import PrecisionExhausted
from .pipeline import (CherryResponse, DimensionResponse, DistortionResponse,
                       PartitionResponse, RunConfig, ScalingsResponse,
                       SweepResponse, TuneResponse, VerifyResponse, execute)
from .rotation import RationalRotationError, TuneSeparationError

app = FastAPI(title="flatspot", version=__version__,
              description="Circle maps with a flat spot: partitions, scalings, "
                          "dimension estimators and the exponent-2 phase transition.")

_CLIENT_ERRORS = (ValueError, RationalRotationError, TuneSeparationError)


def _run(mode: str, config: RunConfig):
    try:
        return execute(mode, config)
    except _CLIENT_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except PrecisionExhausted as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/tune", response_model=TuneResponse)
def tune(config: RunConfig) -> TuneResponse:
    return _run("tune", config)


@app.post("/scalings", response_model=ScalingsResponse)
def scalings(config: RunConfig) -> ScalingsResponse:
    return _run("scalings", config)


@app.post("/partition", response_model=PartitionResponse)
def partition(config: RunConfig) -> PartitionResponse:
    return _run("partition", config)


@app.post("/distortion", response_model=DistortionResponse)
def distortion(config: RunConfig) -> DistortionResponse:
    return _run("distortion", config)


@app.post("/dimension", response_model=DimensionResponse)
def dimension(config: RunConfig) -> DimensionResponse:
    return _run("dimension", config)


@app.post("/sweep", response_model=SweepResponse)
def sweep(config: RunConfig) -> SweepResponse:
    return _run("sweep", config)


@app.post("/cherry", response_model=CherryResponse)
def cherry(config: RunConfig) -> CherryResponse:
    return _run("cherry", config)


@app.post("/verify", response_model=VerifyResponse)
def verify(config: RunConfig) -> VerifyResponse:
    return _run("verify", config)
