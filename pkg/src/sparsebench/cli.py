"""`sparsebench` command line: a thin client over the HTTP service.

Commands talk to the FastAPI app through an in-process ASGI transport by
default, or to a remote instance via --server URL; `sparsebench serve`
starts that instance. File I/O (datasets for remote runs aside, images,
result CSVs) happens on the client side.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

import argparse
import base64
import sys

import httpx

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=None)
    import warnings

    from .service.app import app

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # starlette's httpx shim warning
        from starlette.testclient import TestClient
    return TestClient(app)


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _post(client, path, payload):
    resp = client.post(path, json=payload)
    if resp.status_code == 200:
        return resp.json()
    try:
        detail = resp.json().get("detail", resp.text)
    except ValueError:
        detail = resp.text
    code = EXIT_DATA if isinstance(detail, str) and detail.startswith("data_error") else EXIT_CONFIG
    raise CliError(str(detail), code)


def _bench_payload(args):
    from .bench import read_config_file

    values = {}
    if args.config:
        try:
            values = read_config_file(args.config)
        except (OSError, ValueError) as exc:
            raise CliError(f"config file: {exc}", EXIT_CONFIG)
    overrides = {
        "dataset": args.dataset,
        "train_per_class": args.train_per_class,
        "trials": getattr(args, "trials", None),
        "seed": args.seed,
        "pca_energy": args.pca_energy,
        "sparsity_k": args.sparsity_k,
        "m_keep": args.m_keep,
        "solver_tolerance": args.solver_tolerance,
        "solver_iterations": args.solver_iterations,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    if args.solvers is not None:
        values["solvers"] = tuple(s.strip() for s in args.solvers.split(",") if s.strip())
    if args.lambdas is not None:
        values["lambdas_raw"] = args.lambdas
    if args.resize is not None:
        values["resize_raw"] = args.resize
    if "dataset" not in values:
        raise CliError("a dataset path is required (--dataset or config file)", EXIT_CONFIG)
    payload = {
        "dataset": values["dataset"],
        "solvers": list(values.get("solvers", ("omp", "fista", "tptsr"))),
        "train_per_class": values.get("train_per_class", 5),
        "trials": values.get("trials", 10),
        "seed": values.get("seed", 0),
        "pca_energy": values.get("pca_energy", 0.98),
    }
    if "lambdas_raw" in values:
        payload["lambdas"] = values["lambdas_raw"]
    elif "lambda_grid" in values:
        payload["lambdas"] = ",".join(repr(float(v)) for v in values["lambda_grid"])
    if "resize_raw" in values:
        payload["resize"] = values["resize_raw"]
    elif "resize" in values:
        payload["resize"] = f"{values['resize'][0]}x{values['resize'][1]}"
    for key in ("sparsity_k", "m_keep", "solver_tolerance", "solver_iterations"):
        if key in values:
            payload[key] = values[key]
    out = args.out or values.get("output")
    return payload, out


def cmd_run(args) -> int:
    payload, out = _bench_payload(args)
    with _client(args.server) as client:
        body = _post(client, "/bench/run", payload)
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(body["csv"])
        print(f"results written to {out}")
    else:
        sys.stdout.write(body["csv"])
    print(body["timing_report"])
    for solver, (mean, std) in body["aggregates"].items():
        print(f"{solver:22s}accuracy {100 * mean:6.2f} +- {100 * std:.3f} %")
    return EXIT_OK


def cmd_sweep(args) -> int:
    payload, out = _bench_payload(args)
    with _client(args.server) as client:
        body = _post(client, "/bench/sweep", payload)
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(body["csv"])
        print(f"sweep written to {out}")
    else:
        sys.stdout.write(body["csv"])
    return EXIT_OK


def cmd_denoise(args) -> int:
    try:
        with open(args.infile, "rb") as fh:
            image_b64 = base64.b64encode(fh.read()).decode("ascii")
    except OSError as exc:
        raise CliError(f"cannot read {args.infile}: {exc}", EXIT_DATA)
    payload = {
        "image_pgm_b64": image_b64,
        "sigma": args.sigma,
        "patch": args.patch,
        "stride": args.stride,
        "atoms": args.atoms,
        "sweeps": args.sweeps,
        "delta": args.delta,
    }
    if args.reference:
        try:
            with open(args.reference, "rb") as fh:
                payload["reference_pgm_b64"] = base64.b64encode(fh.read()).decode("ascii")
        except OSError as exc:
            raise CliError(f"cannot read {args.reference}: {exc}", EXIT_DATA)
    with _client(args.server) as client:
        body = _post(client, "/denoise", payload)
    with open(args.out, "wb") as fh:
        fh.write(base64.b64decode(body["image_pgm_b64"]))
    print(f"denoised image written to {args.out}")
    if body.get("psnr_noisy") is not None:
        print(f"PSNR vs reference: noisy {body['psnr_noisy']:.2f} dB -> "
              f"denoised {body['psnr_denoised']:.2f} dB")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _add_bench_flags(sub):
    sub.add_argument("--dataset", help="dataset directory (CSV pair or PGM class folders)")
    sub.add_argument("--solvers", help="comma-separated solver list")
    sub.add_argument("--lambdas", help="grid: comma values or lo:hi:COUNTlog")
    sub.add_argument("--train-per-class", type=int, dest="train_per_class")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--pca-energy", type=float, dest="pca_energy")
    sub.add_argument("--resize", help="resize images to HxW before vectorizing")
    sub.add_argument("--sparsity-k", type=int, dest="sparsity_k")
    sub.add_argument("--m-keep", type=int, dest="m_keep")
    sub.add_argument("--solver-tolerance", type=float, dest="solver_tolerance")
    sub.add_argument("--solver-iterations", type=int, dest="solver_iterations")
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--out", help="write the result CSV here")
    sub.add_argument("--server", help="remote service URL (default: in-process)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsebench",
                                     description="sparse representation benchmark suite")
    cmds = parser.add_subparsers(dest="command", required=True)

    run = cmds.add_parser("run", help="run the accuracy/timing benchmark")
    _add_bench_flags(run)
    run.add_argument("--trials", type=int)
    run.set_defaults(func=cmd_run)

    sweep = cmds.add_parser("sweep", help="accuracy versus lambda on a fixed split")
    _add_bench_flags(sweep)
    sweep.set_defaults(func=cmd_sweep)

    dn = cmds.add_parser("denoise", help="denoise a PGM image")
    dn.add_argument("--in", dest="infile", required=True, help="noisy input PGM")
    dn.add_argument("--out", required=True, help="output PGM path")
    dn.add_argument("--sigma", type=float, required=True, help="noise standard deviation")
    dn.add_argument("--patch", type=int, default=8)
    dn.add_argument("--stride", type=int, default=1)
    dn.add_argument("--atoms", type=int, default=256)
    dn.add_argument("--sweeps", type=int, default=10)
    dn.add_argument("--delta", type=float, default=None)
    dn.add_argument("--reference", help="clean reference PGM for PSNR reporting")
    dn.add_argument("--server", help="remote service URL (default: in-process)")
    dn.set_defaults(func=cmd_denoise)

    serve = cmds.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except httpx.HTTPError as exc:
        print(f"error: service unreachable: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
