"""Command-line interface: ``pvtrain <command> [options]``.

Commands: ``denoise``, ``train``, ``workflow``, ``landscape``, ``synth`` and
``add-noise``. Every option may also come from a JSON file given with
``--config``; keys are the option names with dashes replaced by
underscores, and explicit flags win over the file.

Exit codes: 0 success, 1 usage or I/O error, 2 solver hit the iteration cap
without certifying the gap, 3 workflow reached ``l_max`` uncertified.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .imageio import (
    SYNTH_KINDS,
    add_noise,
    atomic_write_bytes,
    read_image,
    synth,
    write_image,
)
from .operator import FAMILY_LABELS, OperatorSpec, family_from_dict
from .regularizer import check_norm
from .solver import SolverParams, denoise
from .trainer import (
    TrainingPair,
    build_ground,
    error_bound,
    family_certified,
    grid_search,
    landscape,
    run_workflow,
    sobolev_norm,
)

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_UNCERTIFIED = 0, 1, 2, 3

DEFAULTS = {
    "p": "2",
    "P": 1.0,
    "l": 8,
    "l_max": 64,
    "delta": 0.5,
    "gap_tolerance": 1e-6,
    "max_iterations": 5000,
    "step_rule": "accelerated",
    "family": "identity",
    "box": None,
    "family_file": None,
    "theta": None,
    "operator": None,
    "jobs": 1,
    "bits": 16,
    "seed": 0,
    "size": "32",
}

# Options that change how a run executes or where results go, never what
# is computed; left out of reports so reruns compare byte for byte.
_NOT_REPORTED = {"jobs", "output", "report", "out", "config", "command"}


class CliError(Exception):
    pass


def _solver_options(p):
    p.add_argument("--p", help="pointwise norm: 1, 2 or inf (default 2)")
    p.add_argument("--gap-tolerance", type=float, help="relative duality gap (default 1e-6)")
    p.add_argument("--max-iterations", type=int, help="solver iteration cap (default 5000)")
    p.add_argument("--step-rule", choices=("accelerated", "balanced"))


def _family_options(p):
    p.add_argument("--family", choices=FAMILY_LABELS, help="operator family (default identity)")
    p.add_argument("--box", help="parameter box as 'lo,hi[;lo,hi]'")
    p.add_argument("--family-file", help="JSON family declaration (needed for custom-affine)")


def _common(p):
    p.add_argument("--config", help="JSON file with option defaults")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pvtrain",
        description="PV-regularised denoising and bilevel training of (alpha, B).",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="solve the denoising problem for one (alpha, B)")
    _common(p)
    p.add_argument("--input", help="noisy image (.pgm or .pvf)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--operator", help="JSON operator spec file")
    _family_options(p)
    p.add_argument("--theta", help="family parameter point, e.g. '-0.2,0.5'")
    _solver_options(p)
    p.add_argument("--output", help="reconstruction (.pgm or .pvf)")
    p.add_argument("--report", help="JSON diagnostics (default <output>.json)")
    p.add_argument("--bits", type=int, choices=(8, 16))

    for name, text in (
        ("train", "grid search over a finite training ground"),
        ("workflow", "pick the level from an error target, then search"),
        ("landscape", "assessment over the family box at fixed alpha"),
    ):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--clean", help="clean image")
        p.add_argument("--noisy", help="noisy image")
        _family_options(p)
        _solver_options(p)
        p.add_argument("--jobs", type=int, help="worker processes (default 1)")
        if name == "train":
            p.add_argument("--P", type=float, help="alpha box [0, P] (default 1)")
            p.add_argument("--l", type=int, help="refinement level (default 8)")
            p.add_argument("--delta", type=float, help="delta in the error bound (default 0.5)")
            p.add_argument("--report", help="JSON report path")
        elif name == "workflow":
            p.add_argument("--epsilon", type=float, help="acceptable error")
            p.add_argument("--P", type=float, help="alpha box [0, P] (default 1)")
            p.add_argument("--l-max", type=int, help="level cap (default 64)")
            p.add_argument("--report", help="JSON report path")
        else:
            p.add_argument("--alpha", type=float, help="fixed alpha")
            p.add_argument("--grid", type=int, help="lattice points per axis")
            p.add_argument("--out", help="CSV output path")

    p = sub.add_parser("synth", help="write a synthetic test image")
    _common(p)
    p.add_argument("--kind", choices=SYNTH_KINDS)
    p.add_argument("--size", help="N or WxH (default 32)")
    p.add_argument("--out")
    p.add_argument("--bits", type=int, choices=(8, 16))

    p = sub.add_parser("add-noise", help="add seeded Gaussian noise to an image")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--bits", type=int, choices=(8, 16))
    return parser


def resolve_config(args):
    """Merge built-in defaults, the ``--config`` file and explicit flags.

    Only the options of the chosen command are kept.
    """
    flags = vars(args)
    merged = {k: DEFAULTS.get(k) for k in flags}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"bad config file {path}: {exc}") from None
        unknown = sorted(set(loaded) - set(flags))
        if unknown:
            raise CliError(f"unknown option(s) in {path} for {args.command}: {', '.join(unknown)}")
        merged.update(loaded)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        names = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise CliError(f"missing required option(s): {names}")


def _input_path(value, what):
    path = Path(value)
    if not path.is_file():
        raise CliError(f"{what} not found: {path}")
    return path


def _output_path(value, what):
    path = Path(value)
    if not path.parent.exists():
        raise CliError(f"directory for {what} does not exist: {path.parent}")
    return path


def _read(path):
    try:
        return read_image(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {path}: {exc}") from None


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _family(cfg):
    if cfg.get("family_file"):
        data = json.loads(_input_path(cfg["family_file"], "family file").read_text())
    else:
        data = {"label": cfg["family"]}
    if cfg.get("box") is not None:
        box = cfg["box"]
        if isinstance(box, str):
            box = [_floats(part) for part in box.split(";")]
        data["box"] = box
    try:
        return family_from_dict(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(f"bad family declaration: {exc}") from None


def _params(cfg):
    try:
        return SolverParams(
            max_iterations=int(cfg["max_iterations"]),
            gap_tolerance=float(cfg["gap_tolerance"]),
            step_rule=cfg["step_rule"],
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _norm(cfg):
    try:
        return check_norm(cfg["p"])
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _pair(cfg):
    _require(cfg, "clean", "noisy")
    clean = _read(_input_path(cfg["clean"], "clean image"))
    noisy = _read(_input_path(cfg["noisy"], "noisy image"))
    try:
        return TrainingPair(clean, noisy)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _reported(cfg):
    return {k: cfg[k] for k in sorted(cfg) if k not in _NOT_REPORTED}


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, default=_json_default) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _size(value):
    text = str(value).lower()
    if "x" in text:
        w, h = text.split("x")
        return int(w), int(h)
    return int(text), int(text)


def cmd_denoise(cfg):
    _require(cfg, "input", "alpha", "output")
    src = _input_path(cfg["input"], "input image")
    out = _output_path(cfg["output"], "output")
    report = _output_path(cfg.get("report") or str(out) + ".json", "report")
    norm, params = _norm(cfg), _params(cfg)
    if cfg.get("operator"):
        try:
            spec = OperatorSpec.from_dict(
                json.loads(_input_path(cfg["operator"], "operator file").read_text())
            )
        except (KeyError, ValueError) as exc:
            raise CliError(f"bad operator file: {exc}") from None
        theta = None
    else:
        family = _family(cfg)
        theta = _floats(cfg["theta"]) if cfg.get("theta") is not None else [0.0] * family.parameter_dim
        try:
            spec = family.materialize(theta)
        except ValueError as exc:
            raise CliError(str(exc)) from None
    u_eta = _read(src)
    try:
        res = denoise(u_eta, cfg["alpha"], spec, norm, params)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    write_image(out, res.u, int(cfg["bits"]))
    _write_json(
        report,
        {
            "command": "denoise",
            "config": _reported(cfg),
            "operator": spec.to_dict(),
            "theta": theta,
            "iterations": res.iterations,
            "gap": res.gap,
            "converged": res.converged,
            "pv_value": res.pv_value,
            "fidelity": res.fidelity,
        },
    )
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def _search_report(ground, search):
    return {
        "ground": ground.describe(),
        "records": [r.to_dict() for r in search.records],
        "winners": [r.to_dict() for r in search.winners],
        "non_converged": sum(not r.converged for r in search.records),
    }


def cmd_train(cfg):
    _require(cfg, "report")
    report = _output_path(cfg["report"], "report")
    family, norm, params = _family(cfg), _norm(cfg), _params(cfg)
    pair = _pair(cfg)
    P, l, delta = float(cfg["P"]), int(cfg["l"]), float(cfg["delta"])
    try:
        ground = build_ground(P, l, family)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    search = grid_search(pair, ground, norm, params, jobs=int(cfg["jobs"]))
    bound = error_bound(l, P, family.K, family.d, delta, sobolev_norm(pair.noisy, family.d))
    body = {"command": "train", "config": _reported(cfg)}
    body.update(_search_report(ground, search))
    body["error_bound"] = {"value": bound, "delta": delta, "heuristic": not family_certified(family, P)}
    _write_json(report, body)
    return EXIT_OK


def cmd_workflow(cfg):
    _require(cfg, "report", "epsilon")
    report = _output_path(cfg["report"], "report")
    if not float(cfg["epsilon"]) > 0:
        raise CliError("--epsilon must be positive")
    family, norm, params = _family(cfg), _norm(cfg), _params(cfg)
    pair = _pair(cfg)
    res = run_workflow(
        pair,
        float(cfg["epsilon"]),
        float(cfg["P"]),
        family,
        norm,
        params,
        l_max=int(cfg["l_max"]),
        jobs=int(cfg["jobs"]),
    )
    body = {"command": "workflow", "config": _reported(cfg)}
    body.update(_search_report(res.ground, res.search))
    body.update(
        winner=res.winner.to_dict(),
        l_used=res.l_used,
        bound=res.bound,
        certified=res.certified,
        heuristic=res.heuristic,
    )
    _write_json(report, body)
    return EXIT_OK if res.certified else EXIT_UNCERTIFIED


def cmd_landscape(cfg):
    _require(cfg, "alpha", "grid", "out")
    out = _output_path(cfg["out"], "CSV output")
    family, norm, params = _family(cfg), _norm(cfg), _params(cfg)
    if family.parameter_dim > 2:
        raise CliError("landscape supports at most two family parameters")
    pair = _pair(cfg)
    try:
        rows = landscape(pair, float(cfg["alpha"]), family, int(cfg["grid"]), norm, params, int(cfg["jobs"]))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    header = [f"theta_{k + 1}" for k in range(family.parameter_dim)] + ["assessment"]
    lines = [",".join(header)]
    lines += [",".join(repr(float(x)) for x in (*theta, value)) for theta, value in rows]
    atomic_write_bytes(out, ("\n".join(lines) + "\n").encode("ascii"))
    return EXIT_OK


def cmd_synth(cfg):
    _require(cfg, "kind", "out")
    out = _output_path(cfg["out"], "output")
    try:
        w, h = _size(cfg["size"])
        img = synth(cfg["kind"], w, h)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    write_image(out, img, int(cfg["bits"]))
    return EXIT_OK


def cmd_add_noise(cfg):
    _require(cfg, "input", "sigma", "out")
    src = _input_path(cfg["input"], "input image")
    out = _output_path(cfg["out"], "output")
    img = _read(src)
    try:
        noisy = add_noise(img, float(cfg["sigma"]), int(cfg["seed"]))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    write_image(out, noisy, int(cfg["bits"]))
    return EXIT_OK


COMMANDS = {
    "denoise": cmd_denoise,
    "train": cmd_train,
    "workflow": cmd_workflow,
    "landscape": cmd_landscape,
    "synth": cmd_synth,
    "add-noise": cmd_add_noise,
}


# Options whose values may start with '-' (negative coordinates).
_SIGNED_VALUES = ("--theta", "--box")


def _join_signed(argv):
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _SIGNED_VALUES and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_signed(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except CliError as exc:
        print(f"pvtrain {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"pvtrain {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
