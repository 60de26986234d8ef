import time
import logging
import uvicorn
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from typing import List, Optional, Dict, Any

from src.models.combinability.report import combinability_report
from src.models.flow.flow_model import FlowSet
from src.models.scheduling.gcl import assign_queues, emit_gcl
from src.models.scheduling.nds import ScheduleLimits, compute_static_schedule
from src.simulation.simulator import ScenarioFile, run_simulation, scenario_from_file
from src.utils.config import get_settings
from src.utils.exceptions import ArithmeticOverflowError, InvalidSpecError, NdsError, UnschedulableError
from src.utils.utils import setup_logging

VERSION = "1.0.0"

# Set up logging
setup_logging()
logger = logging.getLogger(__name__)

app = FastAPI(
    title="TSN Deterministic Scheduling API",
    description="Combinability analysis, static gate schedules and egress port simulation for TSN flows",
    version=VERSION
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Pydantic models
class LimitsRequest(BaseModel):
    timeout_s: Optional[float] = Field(None, gt=0, description="Schedule synthesis time limit in seconds")
    hyperperiod_cap: Optional[int] = Field(None, gt=0, description="Largest accepted hyperperiod in ns")


class ScheduleRequest(BaseModel):
    flowset: FlowSet = Field(..., description="Link and flows of one egress port")
    limits: Optional[LimitsRequest] = Field(None, description="Overrides of the configured limits")


class ScheduleResponse(BaseModel):
    schedulable: bool = Field(..., description="Whether a valid static schedule was found")
    verdict: Dict[str, Any] = Field(..., description="Schedule verdict with violations")
    offsets: Dict[str, int] = Field(default_factory=dict, description="First window start per flow id")
    gcl: Optional[Dict[str, Any]] = Field(None, description="Gate control list document")
    processing_time: float = Field(..., description="Processing time in seconds")


class AnalyzeResponse(BaseModel):
    report: Dict[str, Any] = Field(..., description="Combinability report")
    summary: List[str] = Field(..., description="Human readable summary lines")
    processing_time: float = Field(..., description="Processing time in seconds")


def _limits(request: Optional[LimitsRequest]) -> ScheduleLimits:
    limits = ScheduleLimits.from_settings()
    if request is None:
        return limits
    return ScheduleLimits(
        hyperperiod_cap=request.hyperperiod_cap or limits.hyperperiod_cap,
        timeout_s=request.timeout_s or limits.timeout_s,
        max_table_packets=limits.max_table_packets,
    )


# Middleware for request timing
@app.middleware("http")
async def add_process_time_header(request: Request, call_next):
    start_time = time.time()
    response = await call_next(request)
    process_time = time.time() - start_time
    response.headers["X-Process-Time"] = str(process_time)
    return response


@app.get("/")
async def root():
    return {"message": "TSN deterministic scheduling API is running", "version": VERSION}


@app.get("/api/status")
async def get_status():
    """
    Get basic system status and the active limits
    """
    settings = get_settings()
    return {
        "status": "ok",
        "limits": {
            "hyperperiod_cap": settings.hyperperiod_cap,
            "schedule_timeout_s": settings.schedule_timeout_s,
            "max_table_packets": settings.max_table_packets,
        },
        "version": VERSION
    }


@app.post("/api/analyze", response_model=AnalyzeResponse)
def analyze(flowset: FlowSet):
    """
    Combinability report of the TS flows at their emergence offsets
    """
    start_time = time.time()
    try:
        report = combinability_report(flowset.flows)
    except (InvalidSpecError, ArithmeticOverflowError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error analyzing flow set: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Error analyzing flow set: {str(e)}")
    return AnalyzeResponse(
        report=report.to_dict(),
        summary=report.summary_lines(),
        processing_time=time.time() - start_time
    )


@app.post("/api/schedule", response_model=ScheduleResponse)
def schedule(request: ScheduleRequest):
    """
    Synthesize the static schedule and its gate control list
    """
    start_time = time.time()
    flowset = request.flowset
    try:
        result, verdict = compute_static_schedule(flowset.flows, limits=_limits(request.limits), edge=flowset.link)
        gcl = None
        if result is not None and verdict.schedulable:
            gcl = emit_gcl(result, assign_queues(flowset.flows, flowset.link.queues)).to_document()
    except (InvalidSpecError, ArithmeticOverflowError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error computing schedule: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Error computing schedule: {str(e)}")

    logger.info(f"Schedule request for {len(flowset.ts_flows)} TS flows: schedulable={verdict.schedulable}")
    return ScheduleResponse(
        schedulable=verdict.schedulable,
        verdict=verdict.to_dict(),
        offsets={str(fid): o for fid, o in sorted(result.offsets.items())} if gcl else {},
        gcl=gcl,
        processing_time=time.time() - start_time
    )


@app.post("/api/simulate")
def simulate(scenario: ScenarioFile):
    """
    Run one egress port simulation and return its metrics
    """
    try:
        built = scenario_from_file(scenario)
        log, report = run_simulation(built)
    except UnschedulableError as e:
        return JSONResponse(status_code=200, content={"schedulable": False, "message": str(e)})
    except (InvalidSpecError, ArithmeticOverflowError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except NdsError as e:
        logger.error(f"Error simulating scenario: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Error simulating scenario: {str(e)}")
    return {"schedulable": True, "events": len(log), "metrics": report.to_dict()}


def start():
    """Entry point for the console script defined in setup.py"""
    settings = get_settings()
    uvicorn.run("src.api.app:app", host=settings.api_host, port=settings.api_port, reload=False)


if __name__ == "__main__":
    start()
