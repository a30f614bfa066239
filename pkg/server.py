"""
REST API Server - Serves the live Blocksworld simulation.

Every response uses one envelope:
    {"success": true, "data": ...}
    {"success": false, "error": {"rule_id"?, "code"?, "message", "pointer"?}}
"""

from __future__ import annotations

import logging
from typing import Any, Optional

import uvicorn
from fastapi import Body, FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from blocks_world import Action, ActionKind
from config import CliConfig
from orchestration import AlreadyRunning, NoActiveSession, SessionError, SimulationOrchestrator, UnknownScenario
from scenarios import SchemaError, ScenarioStore
from verifier import Plan, PlanSchemaError

logger = logging.getLogger(__name__)

SESSION_STATUS = {
    UnknownScenario: 404,
    AlreadyRunning: 409,
    NoActiveSession: 409,
}


class StartRequest(BaseModel):
    scenario_id: Optional[str] = None
    scenario: Optional[dict] = None
    force: bool = False


class ActionRequest(BaseModel):
    block: str
    target: Optional[str] = None


def ok(data: Any) -> dict:
    return {"success": True, "data": data}


def fail(status_code: int, message: str, **extra) -> JSONResponse:
    error = {"message": message, **{k: v for k, v in extra.items() if v is not None}}
    return JSONResponse(status_code=status_code, content={"success": False, "error": error})


def create_app(orchestrator: SimulationOrchestrator | None = None) -> FastAPI:
    if orchestrator is None:
        config = CliConfig.from_env()
        orchestrator = SimulationOrchestrator(ScenarioStore(config.scenarios), config.phase_delay)
    sim = orchestrator

    app = FastAPI(title="Blocksworld Simulation API")
    app.state.orchestrator = sim

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    # ---- Error envelope ----

    @app.exception_handler(SessionError)
    async def session_error(request: Request, exc: SessionError):
        return fail(SESSION_STATUS.get(type(exc), 409), str(exc), code=exc.code)

    @app.exception_handler(SchemaError)
    async def schema_error(request: Request, exc: SchemaError):
        return fail(400, exc.reason, code="schema_error", pointer=exc.pointer or "/")

    @app.exception_handler(PlanSchemaError)
    async def plan_schema_error(request: Request, exc: PlanSchemaError):
        return fail(400, str(exc), code="schema_error", rule_id="malformed")

    @app.exception_handler(ValueError)
    async def bad_request(request: Request, exc: ValueError):
        return fail(400, str(exc), code="bad_request")

    @app.exception_handler(RequestValidationError)
    async def invalid_request(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        where = "/".join(str(p) for p in first.get("loc", ()))
        return fail(422, f"{where}: {first.get('msg', 'invalid request')}", code="invalid_request")

    @app.exception_handler(StarletteHTTPException)
    async def http_error(request: Request, exc: StarletteHTTPException):
        return fail(exc.status_code, str(exc.detail), code="http_error")

    @app.exception_handler(Exception)
    async def unexpected(request: Request, exc: Exception):
        logger.exception("unhandled error on %s", request.url.path)
        return fail(500, "internal error", code="internal_error")

    # ---- Simulation control ----

    @app.get("/")
    def root():
        """Health check endpoint."""
        return ok({"status": "ok", "message": "Blocksworld Simulation API", "running": sim.is_running})

    @app.post("/simulation/start")
    def start_simulation(request: StartRequest):
        summary = sim.start(request.scenario_id, request.scenario, force=request.force)
        return ok(summary)

    @app.post("/simulation/stop")
    def stop_simulation():
        return ok(sim.stop())

    # ---- State queries ----

    @app.get("/status")
    def get_status():
        return ok(sim.status())

    @app.get("/rules")
    def get_rules():
        return ok(sim.rules())

    @app.get("/scenarios")
    def list_scenarios():
        catalog = sim.list_scenarios()
        return ok({"count": len(catalog), "scenarios": catalog})

    @app.get("/log")
    def get_log():
        return ok({"actions": [entry.to_json() for entry in sim.get_log()]})

    # ---- Actions ----

    @app.post("/actions/{action_name}")
    def run_action(action_name: str, request: ActionRequest):
        try:
            kind = ActionKind(action_name)
        except ValueError:
            raise HTTPException(status_code=404, detail=f"Unknown action '{action_name}'") from None
        try:
            action = Action(kind, request.block, request.target)
        except ValueError as exc:
            return fail(400, str(exc), rule_id="malformed")

        result = sim.execute(action)
        if not result.success:
            return {"success": False, "error": {"rule_id": result.rule_id, "message": result.message}}
        return ok({
            "message": result.message,
            "action": action.to_json(),
            "observation": result.observation,
            "goal_reached": result.goal_reached,
        })

    # ---- Verification ----

    @app.post("/verify")
    def verify(payload: Any = Body(...)):
        verdict = sim.verify(Plan.from_json(payload))
        return ok(verdict.to_json())

    return app


app = create_app()


def print_banner(config: CliConfig) -> None:
    base = f"http://localhost:{config.port}"
    print("=" * 60)
    print("  BLOCKSWORLD SIMULATION REST API")
    print("=" * 60)
    print("\nEndpoints:")
    print(f"  Health:    GET  {base}/")
    print(f"  Start:     POST {base}/simulation/start")
    print(f"  Stop:      POST {base}/simulation/stop")
    print(f"  Status:    GET  {base}/status")
    print(f"  Rules:     GET  {base}/rules")
    print(f"  Scenarios: GET  {base}/scenarios")
    print(f"  Actions:   POST {base}/actions/{{pick_up|put_down|stack|unstack}}")
    print(f"  Verify:    POST {base}/verify")
    print(f"  Log:       GET  {base}/log")
    print("=" * 60)


def serve(config: CliConfig) -> None:
    orchestrator = SimulationOrchestrator(ScenarioStore(config.scenarios), config.phase_delay)
    print_banner(config)
    uvicorn.run(create_app(orchestrator), host=config.host, port=config.port, log_level=config.log_level.lower())


if __name__ == "__main__":
    serve(CliConfig.from_env())
