"""HTTP facade: one POST endpoint per experiment subcommand.

Requests carry a full :class:`RunConfig`; responses return the versioned
report plus the CSV artifacts as named payloads, leaving persistence to the
client.  Validation failures surface as 422 through pydantic; numerical
failures become a 500 naming the offending stage.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import __version__
from .config import SUBCOMMANDS, RunConfig
from .runners import NumericalFailure, run

app = FastAPI(
    title="maxreg service",
    version=__version__,
    description="Parabolic regularity experiments over HTTP",
)


class RunResponse(BaseModel):
    report: dict
    files: dict[str, str]


@app.get("/v1/health")
def health() -> dict:
    return {"status": "ok", "version": __version__, "subcommands": list(SUBCOMMANDS)}


def _execute(subcommand: str, config: RunConfig) -> RunResponse:
    try:
        result = run(subcommand, config)
    except NumericalFailure as exc:
        raise HTTPException(
            status_code=500,
            detail={"error": "numerical-failure", "stage": exc.stage},
        ) from exc
    except (ValueError, FloatingPointError, RuntimeError) as exc:
        raise HTTPException(
            status_code=422,
            detail={"error": "invalid-configuration", "message": str(exc)},
        ) from exc
    return RunResponse(report=result.report, files=result.files)


@app.post("/v1/solve", response_model=RunResponse)
def solve(config: RunConfig) -> RunResponse:
    return _execute("solve", config)


@app.post("/v1/diagnose", response_model=RunResponse)
def diagnose(config: RunConfig) -> RunResponse:
    return _execute("diagnose", config)


@app.post("/v1/sweep", response_model=RunResponse)
def sweep(config: RunConfig) -> RunResponse:
    return _execute("sweep", config)


@app.post("/v1/plan", response_model=RunResponse)
def plan(config: RunConfig) -> RunResponse:
    return _execute("plan", config)


@app.post("/v1/qlp", response_model=RunResponse)
def qlp(config: RunConfig) -> RunResponse:
    return _execute("qlp", config)


@app.post("/v1/counterexample", response_model=RunResponse)
def counterexample(config: RunConfig) -> RunResponse:
    return _execute("counterexample", config)
