"""Thin-client command line: every run goes through the HTTP service.

By default the service app is mounted in-process (no socket, same
determinism), so the CLI works standalone; ``--server URL`` switches to a
remote instance and ``maxreg serve`` starts one.  Exit codes: 0 success,
1 numerical failure, 2 validation or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import httpx

from . import __version__
from .config import SUBCOMMANDS, RunConfig, load_config

logger = logging.getLogger("maxreg")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _configure_logging() -> None:
    name = os.environ.get("MAXREG_LOG", "error").lower()
    if name not in _LOG_LEVELS:
        print(f"warning: unknown MAXREG_LOG level {name!r}; using 'error'", file=sys.stderr)
        name = "error"
    logging.basicConfig(level=_LOG_LEVELS[name], format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxreg",
        description="Numerical experiments around non-autonomous parabolic regularity",
    )
    parser.add_argument("--version", action="version", version=f"maxreg {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="TOML run configuration")
        p.add_argument("--out", type=Path, help="output directory for report and CSVs")
        p.add_argument("--seed", type=int, help="seed for randomized samples")
        p.add_argument("--threads", type=int, help="global cap on worker pools")
        p.add_argument("--server", help="remote service URL (default: in-process)")

    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        add_common(p)
        if name == "plan":
            p.add_argument("--theta", help="scale parameter as a rational, e.g. 1/2")
            p.add_argument("--p", dest="p_exponent", help="target exponent, e.g. 2")
            p.add_argument("--alpha", help="regularity order, e.g. 3/5")
            p.add_argument("--q", dest="q_exponent", help="integrability exponent")
            p.add_argument("--ladder", action="store_true", help="emit the bootstrap ladder")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        config = load_config(Path(args.config).read_text(encoding="utf-8"))
    else:
        config = RunConfig()
    updates: dict = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.threads is not None:
        updates["threads"] = args.threads
    if getattr(args, "out", None) is not None:
        updates["out"] = str(args.out)
    if args.subcommand == "plan":
        plan_updates = {}
        if args.theta:
            plan_updates["theta"] = args.theta
        if args.p_exponent:
            plan_updates["p"] = args.p_exponent
        if args.alpha:
            plan_updates["alpha"] = args.alpha
        if args.q_exponent:
            plan_updates["q"] = args.q_exponent
        if args.ladder:
            plan_updates["mode"] = "ladder"
        if plan_updates:
            updates["plan"] = config.plan.model_copy(update=plan_updates)
    if updates:
        config = config.model_copy(update=updates)
    return config


def _post(server: str | None, path: str, payload: dict) -> httpx.Response:
    """POST to a remote service, or drive the app in-process when none given."""
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(path, json=payload)

    import asyncio

    from .service import app  # deferred: keeps plain runs lightweight

    async def go() -> httpx.Response:
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://maxreg.local", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def _write_outputs(out_dir: Path | None, report: dict, files: dict[str, str]) -> None:
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for name, content in files.items():
        (out_dir / name).write_text(content, encoding="utf-8")


def _summarize(subcommand: str, report: dict) -> str:
    results = report.get("results", {})
    if subcommand == "plan":
        plan = results.get("plan", {})
        verdict = "admissible" if plan.get("admissible") else "inadmissible"
        lines = [f"plan: {verdict} (rule: {plan.get('rule')}, required q: {plan.get('required_q')})"]
        for note in plan.get("notes", []):
            lines.append(f"  note: {note}")
        for rung in plan.get("ladder", []):
            lines.append(
                f"  rung from p={rung['start']}: history cap {rung['history_cap']}, "
                f"forcing cap {rung['forcing_cap']} -> {rung['result']} "
                f"({rung['binding']} binds; case {rung['case']})"
            )
        return "\n".join(lines)
    if subcommand == "solve":
        u_final = results.get("u_final", [])
        head = ", ".join(f"{v:.8g}" for v in u_final[:4])
        if len(u_final) > 4:
            head += ", ..."
        return f"solve: u(T) = [{head}], sup norm {results.get('sup_norm'):.8g}"
    if subcommand == "diagnose":
        return (
            f"diagnose: C_p = {results.get('mr_constant'):.6g}, sector bound "
            f"{results['sector']['resolvent_bound']:.6g}"
        )
    if subcommand == "sweep":
        verdicts = ", ".join(f"alpha={a}: {v}" for a, v in results.get("verdicts", {}).items())
        return f"sweep: {verdicts}"
    if subcommand == "qlp":
        if "threshold" in results:
            return f"qlp threshold: {results['threshold']['threshold']}"
        return (
            f"qlp: converged={results.get('converged')} after "
            f"{results.get('iterations')} iteration(s)"
        )
    if subcommand == "counterexample":
        norms = results.get("critical_norms", [])
        pairs = {f"q={row['q']}": round(row["norm"], 4) for row in norms}
        return f"counterexample: norms {pairs}"
    return json.dumps(results)[:200]


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.subcommand == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    try:
        config = _load_run_config(args)
    except Exception as exc:  # config parse or validation error
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        response = _post(args.server, f"/v1/{args.subcommand}", config.model_dump(mode="json"))
    except httpx.HTTPError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 1
    if response.status_code == 422:
        print(f"validation error: {response.text}", file=sys.stderr)
        return 2
    if response.status_code != 200:
        detail = response.json().get("detail", {}) if response.content else {}
        if isinstance(detail, dict) and detail.get("error") == "numerical-failure":
            print(f"numerical failure at stage: {detail.get('stage')}", file=sys.stderr)
        else:
            print(f"service error ({response.status_code}): {response.text}", file=sys.stderr)
        return 1

    payload = response.json()
    out_dir = Path(args.out) if args.out else (Path(config.out) if config.out else None)
    _write_outputs(out_dir, payload["report"], payload["files"])
    print(_summarize(args.subcommand, payload["report"]))
    if out_dir:
        print(f"artifacts written to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
