"""Simulation harnesses: rejection rates over the two-arc family and test runtimes."""

from __future__ import annotations

import csv
import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ecc import direction_grid, shape_eccs
from .errors import ValidationError
from .infer import GroupSample, chi2_pipeline, permutation_test, randomization_nhst
from .sect import LevelGrid, ect_samples, sect_from_ecc, sect_many
from .shapes import FAMILY_R, FamilyParams, sample_group

ALGORITHMS = {1: "chi2", 2: "permutation", 3: "nhst"}
FULL_EPSILONS = (0.0, 0.0125, 0.025, 0.0375, 0.05, 0.075, 0.1)


@dataclass
class StudyConfig:
    epsilon_list: tuple = (0.0, 0.025, 0.05, 0.1)
    n: int = 100
    replicates: int = 50
    gamma: int = 4
    delta: int = 50
    alpha: float = 0.05
    permutations: int = 500
    seed: int = 0
    algorithms: tuple = (1, 2, 3)
    backend: str = "arcs"
    noise_sd: float = 0.05
    curve_points: int = 100
    threads: int | None = None

    def __post_init__(self):
        self.epsilon_list = tuple(float(e) for e in self.epsilon_list)
        self.algorithms = tuple(sorted(int(a) for a in self.algorithms))
        if not self.epsilon_list or any(e < 0 for e in self.epsilon_list):
            raise ValidationError("epsilon_list must be non-empty and non-negative")
        for name in ("n", "replicates", "gamma", "delta", "permutations", "curve_points"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be positive")
        if self.n < 2 or self.delta < 2:
            raise ValidationError("need n >= 2 and delta >= 2")
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must be in (0, 1)")
        if not self.algorithms or any(a not in ALGORITHMS for a in self.algorithms):
            raise ValidationError(f"algorithms must be a non-empty subset of {sorted(ALGORITHMS)}")

    @classmethod
    def full_scale(cls, **overrides) -> "StudyConfig":
        base = dict(epsilon_list=FULL_EPSILONS, replicates=100, permutations=1000)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        d = dict(d)
        if d.pop("full_scale", False):
            return cls.full_scale(**d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown study config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class StudyResult:
    """Aggregated rows plus the per-replicate records they came from."""

    rows: list
    records: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    kind: str = "rejection"

    def rate(self, epsilon: float, algorithm: int) -> float:
        for r in self.rows:
            if r["epsilon"] == epsilon and r["algorithm"] == algorithm:
                return r["rejection_rate"]
        raise KeyError((epsilon, algorithm))

    def row(self, **match) -> dict:
        for r in self.rows:
            if all(r.get(k) == v for k, v in match.items()):
                return r
        raise KeyError(match)

    def write(self, outdir) -> list[Path]:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{self.kind}.csv", out / f"{self.kind}_summary.json"]
        _write_csv(paths[0], self.rows)
        paths[1].write_text(json.dumps({"config": self.config, "rows": self.rows}, indent=2) + "\n")
        if self.records:
            paths.append(out / f"{self.kind}_replicates.csv")
            _write_csv(paths[-1], self.records)
        if self.kind == "rejection":
            eps = sorted({r["epsilon"] for r in self.rows})
            algs = sorted({r["algorithm"] for r in self.rows})
            plot = [{"epsilon": e, **{f"algorithm_{a}": self.rate(e, a) for a in algs}} for e in eps]
            paths.append(out / "rejection_vs_epsilon.csv")
            _write_csv(paths[-1], plot)
        elif self.kind == "runtime":
            # wide layout: one line per (algorithm, Gamma, Delta), one column per n
            ns = sorted({r["n"] for r in self.rows})
            wide = {}
            for r in self.rows:
                line = wide.setdefault((r["algorithm"], r["gamma"], r["delta"]),
                                       {"algorithm": r["algorithm"], "gamma": r["gamma"], "delta": r["delta"]})
                line[f"n={r['n']}"] = f"{r['mean_s']:.4g} ({r['sd_s']:.2g})"
            paths.append(out / "runtime_table.csv")
            _write_csv(paths[-1], [wide[k] for k in sorted(wide)])
        return paths


def _write_csv(path, rows):
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


# --------------------------------------------------------------------------- #

def family_fields(params: FamilyParams, n: int, directions, levels: LevelGrid, seed: int, *keys,
                  backend="arcs"):
    """SECT and ECT stacks ``(n, Gamma, Delta)`` of ``n`` family shapes."""
    shapes = sample_group(params, n, seed, *keys)
    G, D = len(directions), levels.count
    sect = np.empty((n, G, D))
    ect = np.empty((n, G, D), np.int64)
    for i, s in enumerate(shapes):
        for p, c in enumerate(shape_eccs(s, directions, backend)):
            sect[i, p] = sect_from_ecc(c, levels)
            ect[i, p] = ect_samples(c, levels)
    return sect, ect


def _derived_seed(*keys) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint32)[0])


def _replicate(cfg: StudyConfig, ei: int, eps: float, rep: int, directions, levels) -> list[dict]:
    T = levels.T
    s1, e1 = family_fields(FamilyParams(0.0, cfg.noise_sd, cfg.curve_points), cfg.n, directions, levels,
                           cfg.seed, ei, rep, 1, backend=cfg.backend)
    s2, e2 = family_fields(FamilyParams(eps, cfg.noise_sd, cfg.curve_points), cfg.n, directions, levels,
                           cfg.seed, ei, rep, 2, backend=cfg.backend)
    g1 = GroupSample(1, s1, T, e1, directions)
    g2 = GroupSample(2, s2, T, e2, directions)
    pseed = _derived_seed(cfg.seed, ei, rep)
    out = []
    for a in cfg.algorithms:
        t0 = time.perf_counter()
        if a == 1:
            rep_ = chi2_pipeline(g1, g2, cfg.alpha)
        elif a == 2:
            rep_ = permutation_test(g1, g2, cfg.alpha, cfg.permutations, pseed)
        else:
            rep_ = randomization_nhst(g1, g2, cfg.alpha, cfg.permutations, pseed)
        dt = time.perf_counter() - t0
        out.append({"epsilon": eps, "replicate": rep, "algorithm": a, "reject": int(rep_.rejected),
                    "statistic": rep_.statistic, "threshold": rep_.threshold, "p_value": rep_.p_value,
                    "nu_star_index": rep_.nu_star_index, "L_hat": rep_.L_hat,
                    "R_F": rep_.R_F, "R_inf": rep_.R_inf, "runtime_s": dt})
    if 1 not in cfg.algorithms and 2 not in cfg.algorithms:
        # keep the covariance diagnostics available for NHST-only studies
        diag = chi2_pipeline(g1, g2, cfg.alpha)
        for r in out:
            r["R_F"], r["R_inf"] = diag.R_F, diag.R_inf
    return out


def run_rejection_study(cfg: StudyConfig, progress=None) -> StudyResult:
    """Rejection rates of the selected tests, ``K^(0)`` group against ``K^(eps)`` group."""
    directions = direction_grid(2, cfg.gamma).directions
    levels = LevelGrid(2 * FAMILY_R, cfg.delta)
    jobs = [(ei, eps, rep) for ei, eps in enumerate(cfg.epsilon_list) for rep in range(cfg.replicates)]

    def run(job):
        res = _replicate(cfg, job[0], job[1], job[2], directions, levels)
        if progress is not None:
            progress(job, res)
        return res

    if cfg.threads and cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    records = [r for res in results for r in res]
    rows = []
    for eps in cfg.epsilon_list:
        for a in cfg.algorithms:
            sel = [r for r in records if r["epsilon"] == eps and r["algorithm"] == a]
            rf = [r["R_F"] for r in sel if r["R_F"] is not None]
            ri = [r["R_inf"] for r in sel if r["R_inf"] is not None]
            rows.append({"epsilon": eps, "algorithm": a, "method": ALGORITHMS[a],
                         "rejections": sum(r["reject"] for r in sel), "replicates": len(sel),
                         "rejection_rate": sum(r["reject"] for r in sel) / len(sel),
                         "mean_R_F": float(np.mean(rf)) if rf else None,
                         "mean_R_inf": float(np.mean(ri)) if ri else None,
                         "mean_runtime_s": float(np.mean([r["runtime_s"] for r in sel]))})
    return StudyResult(rows, records, asdict(cfg), "rejection")


# --------------------------------------------------------------------------- #

@dataclass
class RuntimeConfig:
    gammas: tuple = (2, 4, 8)
    deltas: tuple = (25, 50, 100)
    ns: tuple = (25, 50, 100)
    replicates: int = 20
    permutations: int = 100
    alpha: float = 0.05
    seed: int = 0
    algorithms: tuple = (1, 2)
    epsilon: float = 0.05
    backend: str = "arcs"
    repeats: int = 3
    include_sect: bool = False

    def __post_init__(self):
        for name in ("gammas", "deltas", "ns", "algorithms"):
            setattr(self, name, tuple(int(x) for x in getattr(self, name)))
        if self.replicates < 1 or self.permutations < 1 or self.repeats < 1:
            raise ValidationError("replicates, permutations and repeats must be positive")
        if any(a not in (1, 2) for a in self.algorithms):
            raise ValidationError("the runtime study covers algorithms 1 and 2")
        if min(self.deltas) < 2 or min(self.ns) < 2 or min(self.gammas) < 1:
            raise ValidationError("invalid runtime grid")

    @classmethod
    def from_dict(cls, d: dict) -> "RuntimeConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown runtime config keys: {sorted(unknown)}")
        return cls(**d)


def _runtime_inputs(cfg: RuntimeConfig, rep: int):
    """ECC curves of the largest groups for one replicate; smaller cells take prefixes."""
    G, n = max(cfg.gammas), max(cfg.ns)
    out = {}
    for gamma in cfg.gammas:
        out[gamma] = direction_grid(2, gamma).directions
    curves = {}
    for label, eps in ((1, 0.0), (2, cfg.epsilon)):
        shapes = sample_group(FamilyParams(eps), n, cfg.seed, 99, rep, label)
        curves[label] = [{gamma: shape_eccs(s, out[gamma], cfg.backend) for gamma in cfg.gammas}
                         for s in shapes]
    return out, curves


def _stack(curves, gamma, levels, n):
    flat = [c for shape in curves[:n] for c in shape[gamma]]
    return sect_many(flat, levels).reshape(n, gamma, levels.count)


def run_runtime_study(cfg: RuntimeConfig | None = None, progress=None) -> StudyResult:
    """Wall-clock time of one run of each algorithm.

    By default the timed region is the test alone, on precomputed SECT
    inputs.  With ``include_sect`` it also covers evaluating the SECT arrays
    from precomputed ECC curves, which is the part whose cost grows with
    every one of Gamma, Delta and n.  Each replicate's time is the minimum
    over ``repeats`` timed runs, which filters out scheduler noise; rows
    report mean and standard deviation over replicates.
    """
    cfg = cfg or RuntimeConfig()
    T = 2 * FAMILY_R
    times: dict = {}
    cells = [(a, g, d, n) for a in cfg.algorithms for g in cfg.gammas for d in cfg.deltas for n in cfg.ns]
    for rep in range(cfg.replicates):
        dirs, curves = _runtime_inputs(cfg, rep)
        full = {}
        for delta in cfg.deltas:
            levels = LevelGrid(T, delta)
            for g in cfg.gammas:
                full[g, delta] = (_stack(curves[1], g, levels, max(cfg.ns)),
                                  _stack(curves[2], g, levels, max(cfg.ns)))
        best = dict.fromkeys(cells, np.inf)
        # every repeat sweeps all cells, so slow drifts in machine speed hit each cell alike
        for _ in range(cfg.repeats):
            for a, gamma, delta, n in cells:
                t0 = time.perf_counter()
                if cfg.include_sect:
                    levels = LevelGrid(T, delta)
                    s1 = _stack(curves[1], gamma, levels, n)
                    s2 = _stack(curves[2], gamma, levels, n)
                else:
                    s1, s2 = full[gamma, delta][0][:n], full[gamma, delta][1][:n]
                g1, g2 = GroupSample(1, s1, T), GroupSample(2, s2, T)
                if a == 1:
                    chi2_pipeline(g1, g2, cfg.alpha)
                else:
                    permutation_test(g1, g2, cfg.alpha, cfg.permutations, seed=rep)
                best[a, gamma, delta, n] = min(best[a, gamma, delta, n], time.perf_counter() - t0)
        for cell, t in best.items():
            times.setdefault(cell, []).append(t)
        if progress is not None:
            progress(rep)
    rows = []
    for (a, gamma, delta, n), ts in sorted(times.items()):
        rows.append({"algorithm": a, "gamma": gamma, "delta": delta, "n": n, "replicates": len(ts),
                     "mean_s": statistics.fmean(ts), "sd_s": statistics.stdev(ts) if len(ts) > 1 else 0.0})
    return StudyResult(rows, [], asdict(cfg), "runtime")
