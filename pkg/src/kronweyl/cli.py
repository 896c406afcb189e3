"""Command line front end.

    kronweyl classify --group g.json --set s.json
    kronweyl closure  --group g.json --set s.json
    kronweyl orbit    --stream primes.json --requirements reqs.json --dim 3
    kronweyl --config job.json

Exit codes: 0 success, 2 invalid input, 3 budget exhausted.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

import jsonschema

from . import equidist, orbit, setexpr, zariski
from .abelian import GroupDescriptor, canonical_json
from .errors import BudgetError, ValidationError

COMMANDS = ("classify", "closure", "dense", "kronecker", "weyl", "orbit", "hom", "flow", "oracle")

LABELS = {
    "classify": "almost n-torsion classification (exact decision procedure)",
    "closure": "Zariski closure in finite-plus-cosets normal form",
    "dense": "Zariski density test",
    "kronecker": "exact rational independence of 1 and the inputs (Kronecker density)",
    "weyl": "Weyl-sum uniform distribution table",
    "orbit": "nested-interval orbit point with exact witnesses",
    "hom": "partial homomorphism hitting torsion-level boxes",
    "flow": "orbit simulation of a torus translation",
    "oracle": "prefix brute-force closure oracle",
}


def _schema(name: str) -> dict:
    text = resources.files("kronweyl.schemas").joinpath(f"{name}.json").read_text("utf-8")
    return json.loads(text)


def _validate(obj, name: str, what: str):
    try:
        jsonschema.validate(obj, _schema(name))
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"{what}: schema violation at {loc}: {exc.message}") from None
    return obj


@dataclass
class JobConfig:
    command: str
    inputs: Dict[str, str] = field(default_factory=dict)
    N: Optional[int] = None
    dim: Optional[int] = None
    eps: Optional[str] = None
    d_bound: int = 12
    budget: int = 32
    output: Optional[str] = None
    format: str = "json"
    extra: dict = field(default_factory=dict)


class Inputs:
    """Loads input files once, remembering their bytes for the report hash."""

    def __init__(self, paths: Dict[str, str]):
        self.paths = {k: v for k, v in paths.items() if v is not None}
        self.raw: Dict[str, bytes] = {}

    def text(self, key: str) -> str:
        if key not in self.paths:
            raise ValidationError(f"missing input --{key.replace('_', '-')}")
        path = Path(self.paths[key])
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
        self.raw[key] = data
        return data.decode("utf-8")

    def json(self, key: str, schema: Optional[str] = None):
        text = self.text(key)
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{self.paths[key]}: malformed JSON at line {exc.lineno} "
                                  f"column {exc.colno}: {exc.msg}") from None
        if schema:
            _validate(obj, schema, self.paths[key])
        return obj

    def digest(self, params: dict) -> str:
        files = {k: hashlib.sha256(v).hexdigest() for k, v in sorted(self.raw.items())}
        return hashlib.sha256(canonical_json({"files": files, "params": params}).encode()).hexdigest()


def _group(inp: Inputs) -> GroupDescriptor:
    return GroupDescriptor.from_json(inp.json("group", "group"))


def _set(inp: Inputs, key: str = "set") -> setexpr.SetExpr:
    return setexpr.from_json(inp.json(key, "setexpr"))


def _requirements(obj, what: str, level: Optional[int] = None) -> List[orbit.Requirement]:
    _validate(obj, "requirements", what)
    out = []
    for r in obj:
        if level is not None and "level" not in r:
            r = dict(r, level=level)
        out.append(orbit.Requirement.from_json(r))
    return out


def _net(cfg: JobConfig, level: int) -> List[orbit.Requirement]:
    reqs = orbit.requirement_net(level, cfg.dim, equidist.parse_rational(cfg.eps or "0"))
    seed = cfg.extra.get("seed")
    if seed is not None:
        # the seed only permutes the order in which boxes are processed
        random.Random(seed).shuffle(reqs)
    return reqs


def _prefix(inp: Inputs, key: str = "input"):
    text = inp.text(key)
    stripped = text.strip()
    if stripped.startswith("["):
        try:
            items = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    else:
        items = [ln.split() for ln in stripped.splitlines() if ln.strip()]
        items = [row[0] if len(row) == 1 else row for row in items]
    pts = []
    for it in items:
        if isinstance(it, list):
            pts.append(tuple(equidist.parse_rational(str(v)) % 1 for v in it))
        else:
            pts.append(equidist.parse_rational(str(it)) % 1)
    if not pts:
        raise ValidationError("empty prefix")
    return pts


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_classify(cfg, inp):
    G, X = _group(inp), _set(inp)
    out = setexpr.describe_class(setexpr.classify(X, G))
    if cfg.N:
        out["prefix"] = setexpr.classify_prefix(X, G, cfg.N, cfg.d_bound).to_json()
    return out


def cmd_closure(cfg, inp):
    G, X = _group(inp), _set(inp)
    C = zariski.zariski_closure(X, G)
    return {"closed_set": C.to_json(), "rendering": C.render(), "finite": C.is_finite()}


def cmd_dense(cfg, inp):
    G, X = _group(inp), _set(inp)
    res = zariski.is_zariski_dense(X, G)
    return {"dense": res.dense, "certificate": res.certificate,
            "closure": zariski.zariski_closure(X, G).render()}


def cmd_oracle(cfg, inp):
    G, X = _group(inp), _set(inp)
    C = zariski.closure_oracle_prefix(X, G, cfg.N or 32, cfg.extra.get("modulus_bound"),
                                      cfg.extra.get("coset_bound", 3))
    exact = zariski.zariski_closure(X, G)
    return {"closed_set": C.to_json(), "rendering": C.render(), "agrees_with_exact": C == exact}


def cmd_kronecker(cfg, inp):
    xs = [equidist.FormalReal.from_json(v) for v in inp.json("input", "reals")]
    res = equidist.kronecker_independence(xs)
    return res.to_json()


def cmd_weyl(cfg, inp):
    pts = _prefix(inp)
    rows = equidist.ud_test(pts, cfg.extra.get("k_max", 5), cfg.extra.get("m", 100))
    return {"rows": [r.to_json() for r in rows], "all_pass": all(r.passed for r in rows),
            "star_discrepancy": float(equidist.coordinate_discrepancy(pts)),
            "note": "magnitudes and bounds are floating point"}


def _stream(inp: Inputs):
    obj = inp.json("stream")
    if isinstance(obj, dict) and obj.get("kind") == "primes":
        if set(obj) != {"kind"}:
            raise ValidationError("the primes stream takes no parameters")
        return orbit.PrimeStream()
    if isinstance(obj, list):
        if not all(isinstance(v, int) or (isinstance(v, str) and v.lstrip("-").isdigit()) for v in obj):
            raise ValidationError("integer streams are lists of integers")
        return orbit.IntStream(int(v) for v in obj)
    _validate(obj, "setexpr", inp.paths["stream"])
    return orbit.ZSetStream(setexpr.from_json(obj), GroupDescriptor(1))


def _witness_check(w: orbit.Witness, req: orbit.Requirement) -> bool:
    return all(m > 0 or (r == 0 and m == 0) for m, r in zip(w.margins, req.box.radii))


def cmd_orbit(cfg, inp):
    if "requirements" in inp.paths:
        reqs = _requirements(inp.json("requirements"), inp.paths["requirements"], level=0)
    elif cfg.eps:
        reqs = _net(cfg, 0)
    else:
        reqs = []
    dim = cfg.dim or (reqs[0].box.dim if reqs else 1)
    x, ws = orbit.find_orbit_point(_stream(inp), reqs, dim)
    by_id = {r.id: r for r in reqs}
    transcript = [dict(w.to_json(), verified=_witness_check(w, by_id[w.req_id])) for w in ws]
    return {"x": x.to_json(), "witnesses": transcript, "scale": orbit.SCALE_NOTE}


def cmd_hom(cfg, inp):
    G = _group(inp)
    fam_obj = inp.json("family")
    if not isinstance(fam_obj, list):
        raise ValidationError("family must be a list of set expressions")
    family = [setexpr.from_json(_validate(s, "setexpr", "family entry")) for s in fam_obj]
    if "requirements" in inp.paths:
        req_obj = inp.json("requirements")
        if not isinstance(req_obj, list) or len(req_obj) != len(family):
            raise ValidationError("requirements must hold one list per family entry")
        reqs = [_requirements(r, "requirements") for r in req_obj]
    else:
        levels = []
        for S in family:
            cls = setexpr.classify(S, G)
            if not isinstance(cls, setexpr.AlmostTorsion):
                raise ValidationError(f"family entry is not almost torsion: {setexpr.describe_class(cls)}")
            levels.append(cls.n)
        reqs = [_net(cfg, n) for n in levels]
    dim = cfg.dim or next((r[0].box.dim for r in reqs if r), 1)
    assignment, ws = orbit.construct_dense_homomorphism(G, family, dim, reqs, budget=cfg.budget)
    out = {"assignment": assignment.to_json(), "witnesses": [w.to_json() for w in ws],
           "scale": orbit.SCALE_NOTE}
    if cfg.N:
        out["injective_window"] = orbit.ensure_injective_window(G, assignment, cfg.N).to_json()
    return out


def cmd_flow(cfg, inp):
    S = _set(inp)
    alpha = equidist.TorusPoint.from_json(inp.json("alpha"))
    x0 = (equidist.TorusPoint.from_json(inp.json("x0")) if "x0" in inp.paths
          else equidist.TorusPoint.zero(alpha.dim))
    boxes = [orbit.ArcBox.from_json(b) for b in inp.json("boxes", "boxes")] if "boxes" in inp.paths else []
    rep = orbit.flow_simulate(S, alpha, x0, boxes, cfg.N or 1000)
    return dict(rep.to_json(), note="discrepancies are floating point")


HANDLERS = {
    "classify": cmd_classify, "closure": cmd_closure, "dense": cmd_dense,
    "kronecker": cmd_kronecker, "weyl": cmd_weyl, "orbit": cmd_orbit, "hom": cmd_hom,
    "flow": cmd_flow, "oracle": cmd_oracle,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

FILE_OPTS = {
    "classify": ["group", "set"], "closure": ["group", "set"], "dense": ["group", "set"],
    "oracle": ["group", "set"], "kronecker": ["input"], "weyl": ["input"],
    "orbit": ["stream", "requirements"], "hom": ["group", "family", "requirements"],
    "flow": ["set", "alpha", "x0", "boxes"],
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kronweyl", description=__doc__.split("\n")[0])
    p.add_argument("--config", help="JSON job file (command, inputs, numeric options)")
    sub = p.add_subparsers(dest="command")
    for name in COMMANDS:
        sp = sub.add_parser(name, help=LABELS[name])
        for f in FILE_OPTS[name]:
            sp.add_argument(f"--{f}", help=f"{f} file")
        sp.add_argument("-N", "--prefix", dest="N", type=int, help="prefix length / window")
        sp.add_argument("--output", "-o", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=["json", "text"], default="json")
        if name in ("classify",):
            sp.add_argument("--d-bound", type=int, default=12)
        if name in ("orbit", "hom"):
            sp.add_argument("--dim", "-d", type=int)
            sp.add_argument("--eps", help="net radius as a rational string, e.g. 1/8")
            sp.add_argument("--seed", type=int, help="permutes the net order only")
        if name == "hom":
            sp.add_argument("--budget", type=int, default=32)
        if name == "weyl":
            sp.add_argument("--k-max", type=int, default=5)
            sp.add_argument("-m", type=int, default=100)
        if name == "oracle":
            sp.add_argument("--coset-bound", type=int, default=3)
            sp.add_argument("--modulus-bound", type=int)
    return p


def _config_from_args(ns) -> JobConfig:
    cfg = JobConfig(ns.command)
    for f in FILE_OPTS[ns.command]:
        if getattr(ns, f, None) is not None:
            cfg.inputs[f] = getattr(ns, f)
    cfg.N = ns.N
    cfg.output = ns.output
    cfg.format = ns.format
    for attr in ("dim", "eps", "d_bound", "budget"):
        if getattr(ns, attr, None) is not None:
            setattr(cfg, attr, getattr(ns, attr))
    for attr in ("seed", "k_max", "m", "coset_bound", "modulus_bound"):
        if getattr(ns, attr, None) is not None:
            cfg.extra[attr] = getattr(ns, attr)
    return cfg


def _config_from_file(path: str) -> JobConfig:
    try:
        obj = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    _validate(obj, "job", path)
    if "command" not in obj:
        raise ValidationError("job file needs a command")
    unknown = set(obj.get("inputs", {})) - set(FILE_OPTS[obj["command"]])
    if unknown:
        raise ValidationError(f"unknown inputs for {obj['command']}: {sorted(unknown)}")
    cfg = JobConfig(obj["command"], dict(obj.get("inputs", {})))
    for k in ("N", "dim", "eps", "d_bound", "budget", "output", "format"):
        if k in obj:
            setattr(cfg, k, obj[k])
    for k in ("seed", "k_max", "m", "coset_bound", "modulus_bound"):
        if k in obj:
            cfg.extra[k] = obj[k]
    return cfg


def _text(report: dict) -> str:
    res = report["result"]
    lines = [f"# {report['computation']}", f"# inputs sha256 {report['inputs_sha256']}"]
    if "rendering" in res:
        lines.append(res["rendering"])
    lines.append(json.dumps(res, indent=2, sort_keys=True))
    return "\n".join(lines) + "\n"


def run(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.config:
            cfg = _config_from_file(ns.config)
        elif ns.command:
            cfg = _config_from_args(ns)
        else:
            parser.print_usage(sys.stderr)
            return 2
        inp = Inputs(cfg.inputs)
        result = HANDLERS[cfg.command](cfg, inp)
        params = {"command": cfg.command, "N": cfg.N, "dim": cfg.dim, "eps": cfg.eps,
                  "d_bound": cfg.d_bound, "budget": cfg.budget, "extra": cfg.extra}
        report = {"computation": LABELS[cfg.command], "command": cfg.command,
                  "inputs_sha256": inp.digest(params), "result": result}
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BudgetError as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return 3
    text = _text(report) if cfg.format == "text" else json.dumps(report, indent=2, sort_keys=True) + "\n"
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
