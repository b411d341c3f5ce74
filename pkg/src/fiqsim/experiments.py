"""Ensemble experiments with pre-registered tolerances.

Every experiment takes a seed, runs independent replicas on their own
randomness streams, and returns a :class:`Report` holding one row per
replica, summary statistics computed from those rows, and pass/fail checks.
:func:`run_experiment` wraps this in a declarative JSON config so a run can
be replayed from the config echoed in its summary.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .actualization import RandomnessSource, actualize_to, measure
from .domains import RationalQuantity, TruncatedReal, digits
from .dynamics import ShiftMap, dyadic_bits, evolve_exact, evolve_fiq
from .fiq import Fiq, Propensity

__all__ = [
    "Report",
    "ExperimentRun",
    "CONFIG_SCHEMA",
    "DEFAULT_PARAMS",
    "DEFAULT_TOLERANCES",
    "indistinguishability_test",
    "measurement_stability_test",
    "recurrence_test",
    "emergence_test",
    "truncation_unit_dependence_demo",
    "exact_recurrence_probability",
    "normalize_config",
    "run_experiment",
    "load_config",
]

CONFIG_SCHEMA = "fiqsim.experiment/1"
SUMMARY_SCHEMA = "fiqsim.summary/1"

DEFAULT_TOLERANCES = {
    "sigma_band": 4.0,
    "chi2_alpha": 0.01,
    "variance_rel_tol": 0.15,
}

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "indistinguishability": {
        "k": 3,
        "R": 8000,
        "T": 3,
        "d": 2,
        "window": ["3/10", "7/10", "1/4"],
        "s": 1,
    },
    "measurement_stability": {
        "schedule": [2, 4, 8, 8, 4],
        "R": 1000,
        "prefix": "",
        "window": [],
    },
    "recurrence": {
        "ic_kind": "fiq",
        "k": 10,
        "T": 50,
        "R": 10000,
        "value": "1/3",
        "prefix": "",
        "window": [],
    },
    "emergence": {
        "n_values": [1, 10, 100, 1000],
        "R": 2000,
        "depth": 16,
    },
    "truncation": {
        "bits": "101",
        "n": 3,
        "scale": "1/2",
    },
}


@dataclass
class Report:
    name: str
    params: dict
    rows: list = field(default_factory=list)
    statistics: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def check(self, name: str, passed: bool, value: Any, tolerance: str) -> None:
        self.checks.append({"name": name, "passed": bool(passed), "value": value, "tolerance": tolerance})


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    # results come back in input order, so serial and parallel folds agree
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (8 * workers))))


def _window(values: Iterable) -> tuple:
    return tuple(Propensity(v) if not isinstance(v, (list, tuple)) else Propensity(int(v[0]), int(v[1])) for v in values)


def _prefix(bits: str) -> tuple:
    return tuple(int(b) for b in bits)


# -- empirical indistinguishability -------------------------------------------


def _indistinguishability_replica(task) -> dict:
    seed, r, k, T, d, window, s = task
    # stream 3r: shared initial prefix, 3r+1: FIQ actualization, 3r+2: hidden completion
    prefix_rng = RandomnessSource(seed, 3 * r)
    f0 = actualize_to(Fiq((), ()), d, prefix_rng)
    f0 = Fiq(f0.prefix, window)
    depth = d + s * T + k

    rng_a = RandomnessSource(seed, 3 * r + 1)
    f, emitted_a = evolve_fiq(f0, ShiftMap(s), T, rng_a)
    reading_a, _ = measure(f, k, rng_a)

    def hidden(stream_id: int) -> tuple[str, str]:
        completed = actualize_to(f0, depth, RandomnessSource(seed, stream_id))
        x = RationalQuantity(completed.prefix_value())
        run = evolve_exact(x, ShiftMap(s), T)
        return run.emitted, "".join(map(str, digits(run.value, k)))

    emitted_b, reading_b = hidden(3 * r + 2)
    emitted_m, reading_m = hidden(3 * r + 1)
    return {
        "replica": r,
        "prefix": f0.prefix_bits(),
        "emitted_fiq": emitted_a,
        "reading_fiq": reading_a,
        "emitted_hidden": emitted_b,
        "reading_hidden": reading_b,
        "reading_matched": reading_m,
        "matched_identical": int(emitted_m == emitted_a and reading_m == reading_a),
    }


def _reading_probabilities(f0: Fiq, start: int, k: int) -> list[Fraction]:
    """Exact probability of each k-bit reading of digits ``start..start+k-1``."""
    probs = [Fraction(1)]
    for j in range(start, start + k):
        q = f0.propensity(j)
        probs = [p * w for p in probs for w in (1 - q, q)]
    return probs


def _goodness_of_fit(counts: np.ndarray, probs: Sequence[Fraction]) -> tuple[float, float]:
    expected = np.array([float(p) for p in probs]) * counts.sum()
    support = expected > 0
    if np.any(counts[~support] > 0):
        return math.inf, 0.0
    if support.sum() < 2:
        return 0.0, 1.0
    res = stats.chisquare(counts[support], expected[support])
    return float(res.statistic), float(res.pvalue)


def _homogeneity(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    table = np.vstack([a, b])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 0.0, 1.0
    res = stats.chi2_contingency(table, correction=False)
    return float(res.statistic), float(res.pvalue)


def indistinguishability_test(
    k: int,
    R: int,
    T: int,
    seed: int,
    d: int = 0,
    window: Sequence = (),
    s: int = 1,
    alpha: float = DEFAULT_TOLERANCES["chi2_alpha"],
    workers: int = 1,
) -> Report:
    """Compare k-bit readings after ``T`` shift steps: FIQ vs pre-drawn real initial conditions.

    Ensemble A starts from a FIQ with a ``d``-digit determined prefix and the
    given window, and actualizes digits as the dynamics reaches them.
    Ensemble B completes the same prefix ahead of time with ``s*T + k`` digits
    drawn from the same propensities and evolves the resulting rational
    exactly.  A third, seed-matched completion reuses ensemble A's stream and
    must agree with it replica by replica.
    """
    if R < 100:
        raise ValueError("indistinguishability_test needs at least 100 replicas")
    if k < 1 or T < 0 or d < 0:
        raise ValueError("need k >= 1, T >= 0, d >= 0")
    window = _window(window)
    params = {"k": k, "R": R, "T": T, "d": d, "window": [str(q) for q in window], "s": s, "seed": seed}
    report = Report("indistinguishability", params)
    report.rows = _map(_indistinguishability_replica, [(seed, r, k, T, d, window, s) for r in range(R)], workers)

    cells = 1 << k
    counts_a = np.zeros(cells, dtype=np.int64)
    counts_b = np.zeros(cells, dtype=np.int64)
    for row in report.rows:
        counts_a[int(row["reading_fiq"], 2)] += 1
        counts_b[int(row["reading_hidden"], 2)] += 1
    chi2, p = _homogeneity(counts_a, counts_b)
    mismatches = sum(1 - row["matched_identical"] for row in report.rows)

    # the shared prefix is made of fair digits, followed by the window and the fair tail
    template = Fiq((), (Fraction(1, 2),) * d + window)
    probs = _reading_probabilities(template, s * T + 1, k)
    gof_a = _goodness_of_fit(counts_a, probs)
    gof_b = _goodness_of_fit(counts_b, probs)
    report.statistics = {
        "counts_fiq": counts_a.tolist(),
        "counts_hidden": counts_b.tolist(),
        "chi2": chi2,
        "dof": int(np.count_nonzero(counts_a + counts_b)) - 1,
        "p_value": p,
        "matched_mismatches": mismatches,
        "expected_probabilities": [str(q) for q in probs],
        "gof_fiq": {"chi2": gof_a[0], "p_value": gof_a[1]},
        "gof_hidden": {"chi2": gof_b[0], "p_value": gof_b[1]},
    }
    if R < 5 * cells:
        report.flags.append(f"under-powered: R={R} < 5*2^k={5 * cells}")
    report.check("homogeneity chi-square p-value", p > alpha, p, f"> {alpha}")
    report.check("seed-matched completion identical", mismatches == 0, mismatches, "== 0")
    report.check("FIQ readings fit propensities", gof_a[1] > alpha, gof_a[1], f"> {alpha}")
    report.check("hidden-variable readings fit propensities", gof_b[1] > alpha, gof_b[1], f"> {alpha}")
    return report


# -- measurement stability -----------------------------------------------------


def _stability_replica(task) -> dict:
    seed, r, schedule, prefix, window = task
    rng = RandomnessSource(seed, r)
    f = Fiq(prefix, window)
    readings = []
    violations = 0
    for k in schedule:
        reading, f = measure(f, k, rng)
        for earlier in readings:
            common = min(len(earlier), len(reading))
            if earlier[:common] != reading[:common]:
                violations += 1
        readings.append(reading)
    return {"replica": r, "readings": "|".join(readings), "violations": violations}


def measurement_stability_test(
    schedule: Sequence[int],
    R: int,
    seed: int,
    prefix: Sequence[int] = (),
    window: Sequence = (),
    workers: int = 1,
) -> Report:
    """Measure every replica at each resolution in ``schedule`` and count readings that disagree."""
    schedule = [int(k) for k in schedule]
    if not schedule or min(schedule) < 1:
        raise ValueError("schedule must be a nonempty list of positive resolutions")
    window = _window(window)
    prefix = tuple(prefix)
    params = {
        "schedule": schedule,
        "R": R,
        "seed": seed,
        "prefix": "".join(map(str, prefix)),
        "window": [str(q) for q in window],
    }
    report = Report("measurement_stability", params)
    report.rows = _map(_stability_replica, [(seed, r, schedule, prefix, window) for r in range(R)], workers)
    total = sum(row["violations"] for row in report.rows)
    report.statistics = {
        "violations": total,
        "replicas_with_violations": sum(1 for row in report.rows if row["violations"]),
        "comparisons": R * len(schedule) * (len(schedule) - 1) // 2,
    }
    report.check("prefix-consistency violations", total == 0, total, "== 0")
    return report


# -- recurrence ----------------------------------------------------------------


def exact_recurrence_probability(k: int, T: int) -> Fraction:
    """Chance that a fair bit stream's first ``k``-bit word reappears at some shift ``1..T``.

    Sums over the initial word ``w`` and runs a KMP automaton for ``w`` over
    the rest of the stream, where ``w[1:]`` is known and the following ``T``
    bits are fair coins.  Counts are kept as integers (strings of each length).
    """
    matched = 0
    for code in range(1 << k):
        w = format(code, f"0{k}b")
        fail = [0] * (k + 1)
        for i in range(1, k):
            j = fail[i]
            while j and w[i] != w[j]:
                j = fail[j]
            fail[i + 1] = j + 1 if w[i] == w[j] else 0
        delta = []
        for state in range(k):
            row = []
            for c in "01":
                st = state
                while st and w[st] != c:
                    st = fail[st]
                row.append(st + 1 if w[st] == c else 0)
            delta.append(row)

        state = 0
        for c in w[1:]:
            state = delta[state][int(c)]
        counts = [0] * k
        counts[state] = 1
        for t in range(1, T + 1):
            nxt = [0] * k
            for st, n in enumerate(counts):
                if n:
                    for ns in delta[st]:
                        if ns == k:
                            matched += n << (T - t)
                        else:
                            nxt[ns] += n
            counts = nxt
    return Fraction(matched, 1 << (T + k))


def _coarse(value: Fraction, k: int) -> str:
    return format((value.numerator << k) // value.denominator, f"0{k}b")


def _recurrence_replica(task) -> dict:
    seed, r, k, T, prefix, window = task
    rng = RandomnessSource(seed, r)
    initial, f = measure(Fiq(prefix, window), k, rng)
    first = None
    shift = ShiftMap(1)
    for t in range(1, T + 1):
        f, _ = evolve_fiq(f, shift, 1, rng)
        reading, f = measure(f, k, rng)
        if reading == initial:
            first = t
            break
    return {"replica": r, "initial": initial, "first_return": "" if first is None else first}


def recurrence_test(
    ic_kind: str,
    k: int,
    T: int,
    R: int = 1,
    seed: int = 0,
    value: Any = "1/3",
    prefix: Sequence[int] = (),
    window: Sequence = (),
    sigma_band: float = DEFAULT_TOLERANCES["sigma_band"],
    workers: int = 1,
) -> Report:
    """Look for the k-digit coarse state to come back under the doubling map within ``T`` steps."""
    if T < 2 or k < 1:
        raise ValueError("need T >= 2 and k >= 1")
    if ic_kind == "rational":
        x = RationalQuantity(Fraction(value))
        params = {"ic_kind": ic_kind, "k": k, "T": T, "value": str(x.value)}
        report = Report("recurrence", params)
        start = _coarse(x.value, k)
        run = evolve_exact(x, ShiftMap(1), T)
        first = next((t for t, v in enumerate(run.values, 1) if _coarse(v.value, k) == start), None)
        pre, period = x.expansion_period()
        report.rows = [{"value": str(x.value), "initial": start, "first_return": "" if first is None else first}]
        report.statistics = {"first_return": first, "preperiod": pre, "period": period}
        if pre == 0:
            ok = first is not None and first <= period
            report.check("periodic orbit returns within one period", ok, first, f"<= {period}")
        else:
            report.flags.append(f"preperiodic expansion (preperiod {pre}); the initial state is never revisited exactly")
        return report
    if ic_kind != "fiq":
        raise ValueError(f"ic_kind must be 'rational' or 'fiq', got {ic_kind!r}")

    window = _window(window)
    prefix = tuple(prefix)
    params = {
        "ic_kind": ic_kind,
        "k": k,
        "T": T,
        "R": R,
        "seed": seed,
        "prefix": "".join(map(str, prefix)),
        "window": [str(q) for q in window],
    }
    report = Report("recurrence", params)
    report.rows = _map(_recurrence_replica, [(seed, r, k, T, prefix, window) for r in range(R)], workers)
    hits = sum(1 for row in report.rows if row["first_return"] != "")
    fraction = hits / R
    baseline = T * 2.0**-k
    sigma = math.sqrt(baseline * (1 - baseline) / R)
    report.statistics = {
        "recurrences": hits,
        "fraction": fraction,
        "chance_baseline": baseline,
        "sigma": sigma,
        "z": (fraction - baseline) / sigma,
    }
    report.check(
        "recurrence fraction matches chance baseline T*2^-k",
        abs(fraction - baseline) <= sigma_band * sigma,
        fraction,
        f"{baseline:.6g} +/- {sigma_band}*{sigma:.3g}",
    )
    if not prefix and not window and k <= 16:
        exact = float(exact_recurrence_probability(k, T))
        sigma_exact = math.sqrt(exact * (1 - exact) / R)
        report.statistics["exact_probability"] = exact
        report.check(
            "recurrence fraction matches exact coincidence probability",
            abs(fraction - exact) <= sigma_band * sigma_exact,
            fraction,
            f"{exact:.6g} +/- {sigma_band}*{sigma_exact:.3g}",
        )
    return report


# -- emergence -----------------------------------------------------------------


def _emergence_replica(task) -> dict:
    seed, stream_id, n, r, depth = task
    rng = RandomnessSource(seed, stream_id)
    blank = Fiq()
    total = 0
    for _ in range(n):
        f = actualize_to(blank, depth, rng)
        total += int(f.prefix_bits(), 2)
    return {"n": n, "replica": r, "mean": float(Fraction(total, n << depth))}


def emergence_test(
    n_values: Sequence[int],
    R: int,
    seed: int,
    depth: int = 16,
    rel_tol: float = DEFAULT_TOLERANCES["variance_rel_tol"],
    workers: int = 1,
) -> Report:
    """Variance of the mean of ``n`` actualized FIQs against ``1/(12 n)``."""
    n_values = [int(n) for n in n_values]
    if not n_values or min(n_values) < 1:
        raise ValueError("n_values must be positive")
    if R < 2:
        raise ValueError("need at least two replicas for a variance")
    params = {"n_values": n_values, "R": R, "seed": seed, "depth": depth}
    report = Report("emergence", params)
    tasks = [(seed, i * R + r, n, r, depth) for i, n in enumerate(n_values) for r in range(R)]
    report.rows = _map(_emergence_replica, tasks, workers)

    table = []
    for n in n_values:
        means = np.array([row["mean"] for row in report.rows if row["n"] == n])
        var = float(np.var(means, ddof=1))
        expected = 1.0 / (12 * n)
        rel = abs(var - expected) / expected
        if n == 1:
            ks = stats.kstest(means, "uniform")
        else:
            ks = stats.kstest(means, "norm", args=(0.5, math.sqrt(expected)))
        table.append(
            {
                "n": n,
                "mean": float(np.mean(means)),
                "variance": var,
                "expected_variance": expected,
                "relative_error": rel,
                "ks_statistic": float(ks.statistic),
                "ks_p_value": float(ks.pvalue),
            }
        )
        report.check(f"variance(n={n}) = 1/(12n)", rel <= rel_tol, var, f"{expected:.6g} within {rel_tol:.0%}")
    report.statistics = {"table": table}
    if len(n_values) >= 2:
        slope = float(np.polyfit(np.log([t["n"] for t in table]), np.log([t["variance"] for t in table]), 1)[0])
        report.statistics["log_log_slope"] = slope
    return report


# -- truncation ----------------------------------------------------------------


def truncation_unit_dependence_demo(q: TruncatedReal, scale: Any, show: int = 16) -> Report:
    """Rescale a truncated quantity and list the digits that fall beyond its cutoff."""
    scale = Fraction(scale)
    rescaled = q.value * scale
    whole = math.floor(rescaled)
    frac = rescaled - whole
    needed = dyadic_bits(frac)
    n = q.n
    x = RationalQuantity(frac)
    lost = []
    if needed is None:
        lost = [j for j in range(n + 1, n + 1 + show) if x.digit_at(j)]
    else:
        lost = [j for j in range(n + 1, needed + 1) if x.digit_at(j)]
    kept = Fraction((frac.numerator << n) // frac.denominator, 1 << n)
    params = {"bits": "".join(map(str, q.bits)), "n": n, "scale": str(scale)}
    report = Report("truncation", params)
    report.statistics = {
        "value": str(q.value),
        "rescaled": str(rescaled),
        "integer_part": whole,
        "required_digits": "infinite" if needed is None else needed,
        "representable": needed is not None and needed <= n,
        "lost_positions": lost if needed is not None else lost + ["..."],
        "truncated": str(whole + kept),
        "truncation_error": str(frac - kept),
    }
    report.rows = [dict(report.statistics, lost_positions=" ".join(map(str, report.statistics["lost_positions"])))]
    return report


# -- config-driven runs --------------------------------------------------------


def normalize_config(config: dict) -> dict:
    """Fill defaults and reject unknown keys; the result is what a run echoes."""
    schema = config.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ValueError(f"unsupported config schema {schema!r}; expected {CONFIG_SCHEMA!r}")
    name = config.get("name") or config.get("experiment")
    if name not in DEFAULT_PARAMS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(DEFAULT_PARAMS)}")
    unknown = set(config) - {"schema", "name", "experiment", "seed", "params", "tolerances", "workers"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    params = dict(DEFAULT_PARAMS[name])
    extra = set(config.get("params", {})) - set(params)
    if extra:
        raise ValueError(f"unknown parameters for {name}: {sorted(extra)}")
    params.update(config.get("params", {}))
    tolerances = dict(DEFAULT_TOLERANCES)
    bad = set(config.get("tolerances", {})) - set(tolerances)
    if bad:
        raise ValueError(f"unknown tolerances: {sorted(bad)}")
    tolerances.update(config.get("tolerances", {}))
    seed = int(config.get("seed", 0))
    if not 0 <= seed < 1 << 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return {
        "schema": CONFIG_SCHEMA,
        "name": name,
        "seed": seed,
        "params": params,
        "tolerances": tolerances,
        "workers": int(config.get("workers", 1)),
    }


def _dispatch(cfg: dict) -> Report:
    name, p, tol, seed, workers = cfg["name"], cfg["params"], cfg["tolerances"], cfg["seed"], cfg["workers"]
    if name == "indistinguishability":
        return indistinguishability_test(
            p["k"], p["R"], p["T"], seed, d=p["d"], window=p["window"], s=p["s"],
            alpha=tol["chi2_alpha"], workers=workers,
        )
    if name == "measurement_stability":
        return measurement_stability_test(
            p["schedule"], p["R"], seed, prefix=_prefix(p["prefix"]), window=p["window"], workers=workers
        )
    if name == "recurrence":
        return recurrence_test(
            p["ic_kind"], p["k"], p["T"], p["R"], seed, value=p["value"], prefix=_prefix(p["prefix"]),
            window=p["window"], sigma_band=tol["sigma_band"], workers=workers,
        )
    if name == "emergence":
        return emergence_test(p["n_values"], p["R"], seed, depth=p["depth"], rel_tol=tol["variance_rel_tol"], workers=workers)
    return truncation_unit_dependence_demo(TruncatedReal.from_string(p["bits"], p["n"]), p["scale"])


@dataclass
class ExperimentRun:
    config: dict
    report: Report
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return self.report.passed

    def summary(self) -> dict:
        return {
            "schema": SUMMARY_SCHEMA,
            "version": __version__,
            "experiment": self.config["name"],
            "config": self.config,
            "statistics": self.report.statistics,
            "checks": self.report.checks,
            "flags": self.report.flags,
            "passed": self.report.passed,
        }

    def results_csv(self) -> str:
        rows = self.report.rows
        buf = io.StringIO()
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2) + "\n"

    def write(self, out_dir: str | Path) -> dict:
        """Write ``results.csv`` and ``summary.json`` (reproducible) and ``runtime.json`` (not)."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "results": out / "results.csv",
            "summary": out / "summary.json",
            "runtime": out / "runtime.json",
        }
        paths["results"].write_text(self.results_csv())
        paths["summary"].write_text(self.summary_json())
        paths["runtime"].write_text(json.dumps({"runtime_seconds": self.runtime}) + "\n")
        return paths


def run_experiment(config: dict) -> ExperimentRun:
    cfg = normalize_config(config)
    started = time.perf_counter()
    report = _dispatch(cfg)
    return ExperimentRun(cfg, report, time.perf_counter() - started)


def load_config(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
