"""FastAPI endpoints over the shared command handlers.

Package validation errors map to HTTP 400; everything else follows the
handlers' dict payloads, validated by the response models.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import OvaDriftError
from . import handlers
from .schemas import (
    EvaluateRequest,
    EvaluateResponse,
    GenDataRequest,
    GenDataResponse,
    HealthRequest,
    HealthResponse,
    InfoResponse,
    MetricRequest,
    MetricResponse,
    SweepRequest,
    SweepResponse,
    TrainRequest,
    TrainResponse,
)

COMMANDS = ["gen-data", "metric", "train", "evaluate", "sweep", "health"]

app = FastAPI(title="ova-drift", version=__version__)


@app.exception_handler(OvaDriftError)
async def package_error_handler(request: Request, exc: OvaDriftError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(FileNotFoundError)
async def missing_file_handler(request: Request, exc: FileNotFoundError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/", response_model=InfoResponse)
def info():
    return InfoResponse(name="ova-drift", version=__version__, commands=COMMANDS)


@app.post("/gen-data", response_model=GenDataResponse)
def gen_data(req: GenDataRequest):
    return handlers.handle_gen_data(**req.model_dump())


@app.post("/metric", response_model=MetricResponse)
def metric(req: MetricRequest):
    return handlers.handle_metric(**req.model_dump())


@app.post("/train", response_model=TrainResponse)
def train(req: TrainRequest):
    return handlers.handle_train(**req.model_dump())


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate(req: EvaluateRequest):
    return handlers.handle_evaluate(**req.model_dump())


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest):
    return handlers.handle_sweep(**req.model_dump())


@app.post("/health", response_model=HealthResponse)
def health(req: HealthRequest):
    return handlers.handle_health(**req.model_dump())
