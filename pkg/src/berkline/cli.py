"""Command-line driver: ``berkline {tree,dendrite,shift,group} <action> --config FILE``.

Exit codes: 0 every check passed, 1 a check failed (nonzero exact residual or
a float residual over tolerance), 2 the config could not be parsed or is out
of bounds, 3 the computation raised.
"""
from __future__ import annotations

import argparse
import json
import math
import random
import sys
from collections.abc import Callable
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import dendrite as dn
from . import groups as gr
from . import shift_ops as so
from . import trees as tr
from .padic import PrimeContext, as_fraction
from .points import BerkPoint

SCHEMA = "berkline/1"
MAX_L = 12
KMS_TOL = 0.15
QC_TOL = 0.25


class ConfigError(Exception):
    pass


class Result:
    def __init__(self) -> None:
        self.files: dict[str, str] = {}
        self.ok = True

    def json(self, name: str, payload: dict[str, Any]) -> None:
        self.files[name] = dump_json(payload)

    def csv(self, name: str, header: list[str], rows: list[list[Any]]) -> None:
        lines = [",".join(header)] + [",".join(render_cell(c) for c in r) for r in rows]
        self.files[name] = "\n".join(lines) + "\n"

    def require(self, cond: bool) -> None:
        self.ok = self.ok and bool(cond)


# --- rendering -------------------------------------------------------------


def render_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.15g}"


def render_cell(c: Any) -> str:
    if isinstance(c, Fraction):
        return f"{c.numerator}/{c.denominator}"
    if isinstance(c, (float, np.floating)):
        return render_float(float(c))
    return str(c)


def plain(x: Any) -> Any:
    """JSON-ready copy: rationals as "n/d", floats at 15 significant digits."""
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(render_float(x)) if math.isfinite(x) else render_float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": plain(x.real), "im": plain(x.imag)}
    if isinstance(x, BerkPoint):
        return x.to_dict()
    if isinstance(x, dict):
        return {str(k): plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [plain(v) for v in x]
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dump_json(payload: dict[str, Any]) -> str:
    return json.dumps(plain({"schema": SCHEMA, **payload}), sort_keys=True, indent=2) + "\n"


def _is_zero(x: Any) -> bool:
    return x == 0


# --- config helpers ----------------------------------------------------------


def _int(cfg: dict[str, Any], key: str, default: int | None = None, lo: int | None = None, hi: int | None = None) -> int:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return default
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key!r} must be an integer")
    if lo is not None and v < lo or hi is not None and v > hi:
        raise ConfigError(f"{key!r}={v} outside [{lo}, {hi}]")
    return v


def _float(cfg: dict[str, Any], key: str, default: float | None = None) -> float | None:
    if key not in cfg:
        return default
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ConfigError(f"{key!r} must be a number")
    return float(as_fraction(v)) if isinstance(v, str) else float(v)


def _rational(v: Any) -> Fraction:
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise ConfigError(f"expected a rational, got {v!r}")
    return as_fraction(str(v))


def _prime(cfg: dict[str, Any]) -> PrimeContext:
    return PrimeContext(_int(cfg, "p"))


def _disks(raw: Any) -> list[tuple[Fraction, Fraction]]:
    if not isinstance(raw, list):
        raise ConfigError("disks must be a list")
    return [(_rational(d["center"]), _rational(d["radius_exp"])) for d in raw]


def _comb(cfg: dict[str, Any], need: int) -> dn.CombSystem:
    raw = cfg.get("comb", {"farey": max(need, 1)})
    if "pairs" in raw:
        return dn.CombSystem(tuple((_rational(q), _rational(b)) for q, b in raw["pairs"]))
    return dn.default_comb(max(int(raw.get("farey", need)), need))


# --- tree --------------------------------------------------------------------


def _random_functions(rng: random.Random, n_vertices: int, count: int) -> list[list[Fraction]]:
    return [[Fraction(rng.randint(-20, 20), rng.randint(1, 6)) for _ in range(n_vertices)] for _ in range(count)]


def plan_tree(action: str, cfg: dict[str, Any], seed: int) -> Callable[[], Result]:
    ctx = _prime(cfg)
    disks = _disks(cfg.get("disks"))
    mult = _int(cfg, "multiplicity", 1, 1)
    samples = _int(cfg, "samples", 10, 0, 1000)
    extension = _disks(cfg.get("extension", [])) if action == "morphism" else []
    tower = [_disks(level) for level in cfg.get("tower", [])] if action == "tower" else []
    lam = None
    if action == "tower":
        re_im = cfg.get("lambda", [0, 1])
        lam = complex(float(_rational(re_im[0]) if isinstance(re_im[0], str) else re_im[0]),
                      float(_rational(re_im[1]) if isinstance(re_im[1], str) else re_im[1]))

    def run() -> Result:
        res = Result()
        tree = tr.build_graph_of_discs(ctx, disks)
        if action == "build":
            res.json("tree.json", {"tree": tree.to_dict()})
        elif action == "spectrum":
            st = tr.assemble_triple(tree, mult)
            table = tr.spectrum_table(st)
            ev = tr.eigenvalues(st)
            exact = np.array([float(x) for x in tr.analytic_spectrum(st)])
            dev = float(np.max(np.abs(ev - exact), initial=0.0))
            norm = tr.operator_norm(st)
            radius = tr.spectral_radius(st)
            res.csv("spectrum.csv", ["eigenvalue", "multiplicity"], [[v, m] for v, m in table])
            res.json("spectrum.json", {
                "dimension": st.dimension,
                "operator_norm": norm,
                "spectral_radius": radius,
                "max_eigenvalue_deviation": dev,
                "norm_deviation": abs(radius - float(norm)),
            })
            res.require(dev <= tr.SPECTRUM_TOL and abs(radius - float(norm)) <= tr.SPECTRUM_TOL)
        elif action == "axioms":
            st = tr.assemble_triple(tree, mult)
            fs = _random_functions(random.Random(seed), len(tree.vertices), samples)
            report = tr.check_even_triple(st, fs)
            bounds = [(tr.commutator_norm(st, f), tr.lipschitz_constant(tree, f)) for f in fs]
            worst = max((c - l for c, l in bounds), default=Fraction(0))
            res.json("axioms.json", {"residuals": report, "commutator_minus_lipschitz": worst, "functions": samples})
            res.require(all(_is_zero(v) for v in report.values()) and worst <= 0)
        elif action == "morphism":
            target = tr.build_graph_of_discs(ctx, disks + extension)
            m = tr.tree_inclusion(tree, target)
            fs = _random_functions(random.Random(seed), len(tree.vertices), max(samples, 1))
            reports = [tr.check_morphism(m, f) for f in fs]
            worst = {k: max(r[k] for r in reports) for k in reports[0]}
            res.json("morphism.json", {"residuals": worst, "source_vertices": len(tree.vertices),
                                       "target_vertices": len(target.vertices)})
            res.require(all(_is_zero(v) for v in worst.values()))
        elif action == "tower":
            levels = [tree] + [tr.build_graph_of_discs(ctx, d) for d in tower]
            profile = tr.tower_resolvent_profile(levels, lam)
            norms = [tr.operator_norm(tr.assemble_triple(t)) for t in levels]
            res.json("tower.json", {"lambda": lam, "operator_norms": norms, "resolvent_profile": profile})
        return res

    return run


# --- dendrite / shift ----------------------------------------------------------


def plan_dendrite(action: str, cfg: dict[str, Any], seed: int) -> Callable[[], Result]:
    cs = _comb(cfg, 1)
    if action == "classify":
        points = [dn.point_from_dict(cs, d) for d in cfg["points"]]

        def run() -> Result:
            res = Result()
            rows = [{"point": dn.point_to_dict(cs, x), "type": dn.classify(cs, x)} for x in points]
            res.json("classify.json", {"points": rows})
            return res

        return run
    words = [(text, dn.parse_word(cs, text)) for text in cfg["words"]]

    def run_adm() -> Result:
        res = Result()
        rows = [{"word": text, "admissible": dn.is_admissible(cs, w)} for text, w in words]
        res.json("admissible.json", {"words": rows})
        return res

    return run_adm


def _vector_from(tb: so.TruncatedBasis, entries: list[dict[str, Any]]) -> np.ndarray:
    v = np.array([Fraction(0)] * len(tb), dtype=object)
    for e in entries:
        x = dn.point_from_dict(tb.cs, e["point"])
        if x not in tb.index:
            raise so.InadmissibleWord(f"{e['point']} is not a basis point")
        v[tb.index[x]] += _rational(e.get("value", "1"))
    return v


def _sparse_entries(tb: so.TruncatedBasis, v: np.ndarray) -> list[dict[str, Any]]:
    return [{"point": dn.point_to_dict(tb.cs, tb.points[i]), "value": v[i]} for i in range(len(tb)) if v[i] != 0]


def _simple_function(cs: dn.CombSystem, raw: list[dict[str, Any]]) -> list[tuple[complex, dn.Word]]:
    out = []
    for term in raw:
        c = term.get("coeff", 1)
        c = complex(c[0], c[1]) if isinstance(c, list) else complex(float(_rational(c)) if isinstance(c, str) else c)
        out.append((c, dn.parse_word(cs, term["word"])))
    return out


def plan_shift(action: str, cfg: dict[str, Any], seed: int) -> Callable[[], Result]:
    N = _int(cfg, "N", lo=1)
    D = _int(cfg, "D", lo=1)
    cs = _comb(cfg, N)
    pairs = _int(cfg, "pairs", 100, 1, 10000)
    raw_input = cfg.get("input", [])
    f_raw, g_raw = cfg.get("f", [{"coeff": 1, "word": ""}]), cfg.get("g", [{"coeff": 1, "word": ""}])
    f_simple, g_simple = _simple_function(cs, f_raw), _simple_function(cs, g_raw)

    def run() -> Result:
        res = Result()
        tb = so.TruncatedBasis(cs, N, D)
        head = {"N": N, "D": D, "basis_size": len(tb)}
        if action == "verify-relations":
            reports = so.verify_relations(tb)
            summary = so.relation_summary(reports)
            res.json("relations.json", {**head, "summary": summary, "reports": reports})
            res.require(all(r["residual"] == 0 for r in reports))
        elif action == "partition":
            rep = so.partition_identity(tb)
            res.json("partition.json", {**head, "residual": rep["residual"],
                                        "excluded": [dn.point_to_dict(cs, x) for x in rep["excluded"]]})
            res.require(rep["residual"] == 0)
        elif action == "pf":
            rng = np.random.default_rng(seed)
            worst = 0.0
            for _ in range(pairs):
                psi = rng.standard_normal(len(tb)) + 1j * rng.standard_normal(len(tb))
                xi = rng.standard_normal(len(tb)) + 1j * rng.standard_normal(len(tb))
                worst = max(worst, so.pf_adjointness_residual(tb, psi, xi))
            out: dict[str, Any] = {**head, "adjointness_residual": worst, "pairs": pairs}
            if raw_input:
                v = _vector_from(tb, raw_input)
                out["input"] = _sparse_entries(tb, v)
                out["output"] = _sparse_entries(tb, so.perron_frobenius_apply(tb, v))
            res.json("pf.json", out)
            res.require(worst <= so.FLOAT_TOL)
        elif action == "pvm":
            rep = so.pvm_consistency(tb)
            res.json("pvm.json", {**head, **rep})
            res.require(rep["max_refinement_residual"] == 0 and rep["orthogonality_residual"] == 0
                        and rep["empty_set_residual"] == 0)
        elif action == "spectral-integral":
            rep = so.spectral_integral_check(tb, f_simple, g_simple)
            res.json("spectral_integral.json", {**head, **rep})
            res.files["spectral_integral.csv"] = so.operator_csv(so.spectral_integral(tb, f_simple))
            res.require(rep["adjoint_residual"] <= so.FLOAT_TOL and rep["multiplicative_residual"] <= so.FLOAT_TOL
                        and abs(rep["operator_norm"] - rep["sup_norm"]) <= 1e-9)
        elif action == "cyclic":
            if raw_input:
                f = _vector_from(tb, raw_input).astype(complex)
            else:
                f = np.random.default_rng(seed).standard_normal(len(tb)).astype(complex)
            rep = so.cyclic_isometry_check(tb, f)
            res.json("cyclic.json", {**head, **rep})
            res.require(rep["max_residual"] <= so.FLOAT_TOL)
        return res

    return run


# --- group ---------------------------------------------------------------------


def plan_group(action: str, cfg: dict[str, Any], seed: int, threads: int) -> Callable[[], Result]:
    G = gr.group_from_config(cfg)
    L = _int(cfg, "L", 8, 0, MAX_L)
    depth = _int(cfg, "depth", 2, 1)
    s = _float(cfg, "s")
    beta = _float(cfg, "beta")
    t = _float(cfg, "t", 1.0)
    mode = cfg.get("mode", "rho")
    if mode not in ("rho", "diam"):
        raise ConfigError(f"unknown mode {mode!r}")
    gamma_word = gr.parse_group_word(cfg.get("gamma", "a"))
    tol = _float(cfg, "tolerance", QC_TOL if action == "quasiconformal" else KMS_TOL)
    if G.word_count(L) > gr.MAX_WORDS:
        raise ConfigError(f"L={L} exceeds the word cap")

    def run() -> Result:
        res = Result()
        orbit = gr.orbit_enumerate(G, L, threads=threads)
        if G.pingpong:
            res.require(gr.check_pingpong(G))

        def delta() -> gr.CriticalExponent:
            return gr.critical_exponent_estimate(G, L, orbit)

        if action == "orbit":
            res.csv("orbit.csv", ["word", "rho"], [[o.name, o.distance] for o in orbit])
        elif action == "delta":
            ce = delta()
            res.json("delta.json", {
                "L": L, "delta": ce.delta, "radii": ce.radii, "counts": ce.counts,
                "fit_radii": ce.fit_radii, "rms_residual": ce.rms_residual,
            })
        elif action == "poincare":
            exponent = s if s is not None else delta().delta
            ps = gr.poincare_series(G, exponent, L, mode, orbit)
            res.json("poincare.json", {"L": L, "s": exponent, "mode": mode, "partial_sum": ps.partial,
                                       "tail_bound": ps.tail_bound, "shells": ps.shells})
        elif action == "ps-measure":
            exponent = s if s is not None else delta().delta
            sample = gr.ps_measure_estimate(G, exponent, L, depth, orbit)
            res.csv("ps_measure.csv", ["cylinder", "weight"],
                    [[gr.label_str(k), w] for k, w in sample.cylinders().items()])
        elif action == "quasiconformal":
            d = delta().delta
            sample = gr.ps_measure_estimate(G, s if s is not None else d, L, depth, orbit)
            rep = gr.quasiconformality_report(G, sample, d, G.element(gamma_word))
            res.json("quasiconformal.json", {"L": L, "depth": depth, "delta": d, "gamma": gr.word_name(gamma_word),
                                             "tolerance": tol, **rep})
            res.require(rep["max_deviation"] <= tol)
        elif action == "kms":
            d = delta().delta
            b_star = beta if beta is not None else gr.kms_temperature(d, G.p)
            a, b = gr.kms_pair(G, depth)
            rows = {}
            for name, bt in (("beta", b_star), ("half_beta", b_star / 2)):
                sample = gr.ps_measure_estimate(G, bt * math.log(G.p), L, depth, orbit)
                rows[name] = {"beta": bt, "residual": gr.kms_residual(a, b, bt, sample)}
            res.json("kms.json", {"L": L, "depth": depth, "delta": d, "tolerance": tol, **rows})
            res.require(rows["beta"]["residual"] <= tol and rows["beta"]["residual"] < rows["half_beta"]["residual"])
        elif action == "hamiltonian":
            a, _ = gr.kms_pair(G, depth)
            labels = sorted({gr.boundary_label(BerkPoint(G.p, dd.center, math.inf), depth)
                             for pair in (G.pingpong or ()) for dd in pair}, key=gr._label_sort)
            terms = {w: gr.CylinderFunction(G.p, depth, {lab: 1 for lab in labels})
                     for w in [(), *[(s_,) for s_ in G.letters()]]}
            elem = gr.CrossedElement(G, terms) if labels else a
            basis = gr.hamiltonian_basis(elem)
            eig = gr.hamiltonian_apply(G, basis, np.ones(len(basis)))
            resid = gr.hamiltonian_evolution_residual(elem, t)
            res.json("hamiltonian.json", {
                "t": t,
                "slots": [{"cylinder": gr.label_str(lab), "word": gr.word_name(w), "eigenvalue": e.real}
                          for (lab, w), e in zip(basis, eig)],
                "evolution_residual": resid,
            })
            res.require(resid <= 1e-12)
        return res

    return run


# --- entry point ---------------------------------------------------------------

ACTIONS = {
    "tree": ["build", "spectrum", "axioms", "morphism", "tower"],
    "dendrite": ["classify", "admissible"],
    "shift": ["verify-relations", "partition", "pf", "pvm", "spectral-integral", "cyclic"],
    "group": ["orbit", "delta", "poincare", "ps-measure", "quasiconformal", "kms", "hamiltonian"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="berkline", description="Exact computations on the p-adic Berkovich line.")
    sub = parser.add_subparsers(dest="module", required=True)
    for module, actions in ACTIONS.items():
        mp = sub.add_parser(module)
        msub = mp.add_subparsers(dest="action", required=True)
        for action in actions:
            ap = msub.add_parser(action)
            ap.add_argument("--config", required=True, type=Path)
            ap.add_argument("--out", type=Path, default=Path("."))
            ap.add_argument("--threads", type=int, default=1)
            ap.add_argument("--seed", type=int, default=0)
    return parser


def _plan(args: argparse.Namespace, cfg: dict[str, Any]) -> Callable[[], Result]:
    if args.module == "tree":
        return plan_tree(args.action, cfg, args.seed)
    if args.module == "dendrite":
        return plan_dendrite(args.action, cfg, args.seed)
    if args.module == "shift":
        return plan_shift(args.action, cfg, args.seed)
    return plan_group(args.action, cfg, args.seed, max(1, args.threads))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = json.loads(args.config.read_text())
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        run = _plan(args, cfg)
    except (OSError, json.JSONDecodeError, ConfigError, KeyError, TypeError, ValueError, ZeroDivisionError, IndexError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result = run()
    except Exception as exc:  # noqa: BLE001 - every failure inside a computation maps to exit 3
        print(f"computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    args.out.mkdir(parents=True, exist_ok=True)
    for name, text in result.files.items():
        (args.out / name).write_text(text)
        print(args.out / name)
    if not result.ok:
        print("check failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
