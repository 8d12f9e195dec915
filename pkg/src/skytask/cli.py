"""Command-line client for the workbench service.

Every subcommand is a plain HTTP call. By default the service app is mounted
in-process (no server needed); pass --server to talk to a running instance,
and use `skytask serve` to start one."""

from __future__ import annotations

import argparse
import json
import sys


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skytask",
        description="LEO telescope-tasking workbench: train, evaluate, track, simulate.",
    )
    parser.add_argument("--server", metavar="URL", default=None,
                        help="send requests to a running service instead of in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run the full multi-run experiment")
    train.add_argument("--config", default="default",
                       help="INI config path or 'default' (default: default)")
    train.add_argument("--seed", type=int, default=None, help="master seed override")
    train.add_argument("--iterations", type=int, default=None, help="iteration override")
    train.add_argument("--runs", type=int, default=None, help="number of training runs")
    train.add_argument("--out", default="artifacts", help="artifact directory")

    ev = sub.add_parser("evaluate", help="greedy evaluation of a saved checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--config", default="default")
    ev.add_argument("--episodes", type=int, default=10)
    ev.add_argument("--seed", type=int, default=0)

    base = sub.add_parser("baseline", help="random-policy evaluation")
    base.add_argument("--config", default="default")
    base.add_argument("--episodes", type=int, default=10)
    base.add_argument("--seed", type=int, default=0)

    track = sub.add_parser("track", help="run the EKF over a saved measurement log")
    track.add_argument("--measurements", required=True, help="measurement CSV path")
    track.add_argument("--config", default="default")
    track.add_argument("--run-id", type=int, default=None,
                       help="run to pull from a multi-run measurement file")
    track.add_argument("--out", default=None, help="directory for track_traces.csv")

    sim = sub.add_parser("simulate", help="dump truth orbits and telescope-frame paths")
    sim.add_argument("--config", default="default")
    sim.add_argument("--seed", type=int, default=None, help="constellation seed override")
    sim.add_argument("--out", default="artifacts", help="output directory")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _client(server: str | None):
    if server is not None:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _post(client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise RuntimeError(f"{path} failed ({response.status_code}): {detail}")
    return response.json()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    try:
        with _client(args.server) as client:
            if args.command == "train":
                body = _post(client, "/train", {
                    "config": args.config, "seed": args.seed,
                    "iterations": args.iterations, "runs": args.runs, "out": args.out,
                })
                print(f"artifacts: {body['artifact_dir']}")
                for row in body["final_iteration_means"]:
                    print(f"final mean return [{row['policy']}]: {row['mean_return']:.3f}")
                print(f"files: {', '.join(body['files'])}")
            elif args.command == "evaluate":
                body = _post(client, "/evaluate", {
                    "checkpoint": args.checkpoint, "config": args.config,
                    "episodes": args.episodes, "seed": args.seed,
                })
                print(f"average return over {body['episodes']} episodes: "
                      f"{body['average_return']:.3f}")
            elif args.command == "baseline":
                body = _post(client, "/baseline", {
                    "config": args.config, "episodes": args.episodes, "seed": args.seed,
                })
                print(f"random-policy average return over {body['episodes']} episodes: "
                      f"{body['average_return']:.3f}")
            elif args.command == "track":
                body = _post(client, "/track", {
                    "measurements": args.measurements, "config": args.config,
                    "out": args.out, "run_id": args.run_id,
                })
                print(f"tracked {body['satellites']} satellites over {body['steps']} steps")
                traces = body["final_log_traces"]
                values = sorted(traces.items(), key=lambda kv: float(kv[1]))
                for sat, val in values[:5]:
                    print(f"  satellite {sat}: final log-trace {float(val):.3f}")
                if body["out_file"]:
                    print(f"wrote {body['out_file']}")
            elif args.command == "simulate":
                body = _post(client, "/simulate", {
                    "config": args.config, "seed": args.seed, "out": args.out,
                })
                print(f"wrote {body['rows']} rows to {body['path']}")
    except (RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
