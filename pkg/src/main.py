"""
MCP Server for EVI Output Regulation

Exposes scenario runs, convergence studies, design verification and
well-posedness checks as tools.
"""
import asyncio
import logging
import os
from contextlib import asynccontextmanager
from typing import List, Optional

from mcp.server.fastmcp import FastMCP
from dotenv import load_dotenv

from integrator import check_assumptions
from scenarios import (
    builtin_names,
    convergence_study as run_convergence_study,
    format_table,
    get_builtin,
    load_scenario,
    run_scenario as execute_scenario,
    verify_design as execute_verification,
)
from scenarios.report import format_value
from utils.settings import Settings

# Load environment variables
load_dotenv()

# Configure logging
logging.basicConfig(
    level=os.getenv("EVI_LOG_LEVEL", "INFO").upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

settings: Optional[Settings] = None

RUN_SUMMARY_KEYS = (
    "steps",
    "jumps",
    "max_constraint_violation",
    "terminal_tracking_error",
    "passivity.margin",
    "lyapunov.monotone",
    "monotonicity.max_cross_term",
)


@asynccontextmanager
async def lifespan(server):
    """Load settings on startup"""
    global settings

    logger.info("Initializing MCP server...")
    settings = Settings.from_env()
    logger.info(f"MCP server initialized (output dir {settings.output_dir}, tol {settings.tol:g})")

    yield

    logger.info("Shutting down MCP server...")


# Create MCP server
mcp = FastMCP(
    "evi-regulation",
    lifespan=lifespan,
    host=os.getenv("HOST", "0.0.0.0"),
    port=int(os.getenv("PORT", "8052")),
)


def _settings() -> Settings:
    global settings
    if settings is None:
        settings = Settings.from_env(dotenv=False)
    return settings


@mcp.tool()
async def run_scenario(
    name_or_path: str,
    dt: Optional[float] = None,
    horizon: Optional[float] = None,
    out_dir: Optional[str] = None
) -> str:
    """
    Simulate a regulation scenario and write trajectory CSV, error CSV and report

    Args:
        name_or_path: Builtin scenario name or path to a scenario JSON file
        dt: Optional step size override
        horizon: Optional horizon override
        out_dir: Optional output directory

    Returns:
        Status message with the key report values and written files
    """
    try:
        logger.info(f"Running scenario {name_or_path}")
        result = await asyncio.to_thread(
            execute_scenario, name_or_path, dt=dt, horizon=horizon, out_dir=out_dir, settings=_settings()
        )

        output = [f"✅ Scenario {result.name} finished\n"]
        output.append("📊 Summary:")
        for key in RUN_SUMMARY_KEYS:
            output.append(f"  • {key}: {format_value(result.item(key))}")
        if result.files:
            output.append("\n📁 Files:")
            for kind, path in result.files.items():
                output.append(f"  • {kind}: {path}")
        return "\n".join(output)

    except Exception as e:
        error_msg = f"❌ Error running scenario: {str(e)}"
        logger.error(error_msg, exc_info=True)
        return error_msg


@mcp.tool()
async def convergence_study(name_or_path: str, dts: List[float]) -> str:
    """
    Grid-refinement study of a scenario against a reference at min(dts) / 4

    Args:
        name_or_path: Builtin scenario name or scenario file
        dts: At least three step sizes, each an integer multiple of the smallest

    Returns:
        Table of errors and the fitted convergence order
    """
    try:
        logger.info(f"Convergence study of {name_or_path} over {dts}")
        table = await asyncio.to_thread(run_convergence_study, name_or_path, dts, settings=_settings())
        if table.error:
            return f"❌ Convergence study of {table.scenario}: {table.error}\n\n{format_table(table)}"
        return f"✅ Convergence study of {table.scenario}\n\n{format_table(table)}"

    except Exception as e:
        error_msg = f"❌ Convergence study error: {str(e)}"
        logger.error(error_msg, exc_info=True)
        return error_msg


@mcp.tool()
async def verify_design(path: str) -> str:
    """
    Re-run the residual and passivity checks of a design file

    Args:
        path: Design JSON file

    Returns:
        Pass/fail message with margins
    """
    try:
        result = await asyncio.to_thread(execute_verification, path, tol=_settings().tol)
        lines = [f"  • {key}: {format_value(value)}" for key, value in result.items]
        if result.passed:
            return f"✅ Design {result.name} verified\n\n" + "\n".join(lines)
        failures = "\n".join(f"  • {f}" for f in result.failures)
        return f"❌ Design {result.name} failed verification:\n{failures}\n\n" + "\n".join(lines)

    except Exception as e:
        error_msg = f"❌ Error verifying design: {str(e)}"
        logger.error(error_msg, exc_info=True)
        return error_msg


@mcp.tool()
async def list_scenarios() -> str:
    """
    List the builtin scenarios

    Returns:
        Formatted list of scenario names and descriptions
    """
    try:
        output = ["📚 Builtin scenarios:\n"]
        for name in builtin_names():
            scenario = await asyncio.to_thread(get_builtin, name)
            output.append(f"  • {name} ({scenario.controller}): {scenario.description}")
        return "\n".join(output)

    except Exception as e:
        error_msg = f"❌ Error listing scenarios: {str(e)}"
        logger.error(error_msg, exc_info=True)
        return error_msg


@mcp.tool()
async def check_system_assumptions(name_or_path: str) -> str:
    """
    Well-posedness checks of a scenario's plant with its design certificate P

    Args:
        name_or_path: Builtin scenario name or scenario file

    Returns:
        One line per assumption with its margin
    """
    try:
        current = _settings()
        scenario = await asyncio.to_thread(load_scenario, name_or_path, current.tol)
        report = await asyncio.to_thread(
            check_assumptions, scenario.plant, scenario.design.P, seed=current.seed, tol=current.tol
        )
        mark = "✅" if report.all_passed else "❌"
        output = [f"{mark} Assumptions for {scenario.name}\n"]
        for check in report.checks():
            status = "pass" if check.passed else "FAIL"
            line = f"  • {check.name}: {status} (margin {check.margin:.3e})"
            if not check.exhaustive:
                line += " [sampled]"
            if check.detail:
                line += f" {check.detail}"
            output.append(line)
        return "\n".join(output)

    except Exception as e:
        error_msg = f"❌ Error checking assumptions: {str(e)}"
        logger.error(error_msg, exc_info=True)
        return error_msg


if __name__ == "__main__":
    # Run the server
    transport = os.getenv("TRANSPORT", "stdio")

    logger.info(f"Starting MCP server {mcp.name} with {transport} transport")

    mcp.run(transport=transport)
