"""Configuration-driven experiment runner.

Configs are plain ``key = value`` text with ``#`` comments.  Every artifact
starts with the fully resolved config echoed as ``# key = value`` lines, so a
CSV on its own says how it was produced.  CSV numbers use 17 significant
digits and are byte-identical for a fixed config and seed.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .detection import MonitorModel, detect_stream, detection_csv, threshold_gamma
from .diffusive import make_nodes, run_synchronous
from .errors import AlgorithmFailure, ConfigError, ContractError
from .finite_memory import (
    BlockLayout,
    decay_csv,
    decay_fit,
    local_error,
    pinv_decay_csv,
    truncated_sweep,
    verify_pinv_decay,
)
from .incremental import (
    approximation_error_exact,
    communications_expected,
    default_epsilon,
    residual_gain_norm,
    run_incremental,
    wls_incremental,
    wls_oracle,
)
from .network import (
    REFERENCE_BUS,
    RegionPartition,
    area_measurement_matrix,
    area_partition,
    dc_measurement_matrix,
    draw_noise,
    inject_false_data,
    injection_rows,
    lattice_grid,
    monitor_graph_from_blocks,
    random_consistent_system,
    read_grid,
    synthetic_grid,
)

log = logging.getLogger(__name__)

KINDS = (
    "solve",
    "epsilon_sweep",
    "measurement_sweep",
    "detection",
    "lattice_decay",
    "complexity_counts",
)


def _float_list(s: str) -> list[float]:
    return [float(t) for t in s.replace(",", " ").split()]


def _int_list(s: str) -> list[int]:
    return [int(t) for t in s.replace(",", " ").split()]


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


@dataclass
class ExperimentConfig:
    kind: str = "solve"
    seed: int = 0
    # grids
    a: int = 5
    b: int = 4
    buses: int = 118
    branches: int = 186
    monitors: int = 5
    # noise and embedding
    sigma: float = 0.01
    epsilon: float | None = None
    epsilons: list[float] | None = None
    estimator: str = "diffusive"
    # monte carlo
    trials: int = 100
    budgets: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    # detection
    clean_snapshots: int = 100
    stream_length: int = 20
    w_max: float | None = None
    w_max_rule: str = "noise"
    gamma: float | None = None
    attack_monitor: int = 0
    attack_row: int = 0
    # lattice
    tracked: list[int] | None = None
    # complexity
    rows: int = 12
    states: int = 4
    block_sizes: list[int] | None = None
    compact: bool = False
    # solve
    grid_file: str | None = None
    measurement_file: str | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"kind: unknown experiment {self.kind!r}")
        for key in ("a", "b", "buses", "monitors", "trials", "clean_snapshots",
                    "stream_length", "rows", "states"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key}: must be >= 1")
        if self.branches < self.buses - 1:
            raise ConfigError("branches: too few to connect the grid")
        if not self.sigma > 0:
            raise ConfigError("sigma: must be > 0")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon: must be > 0")
        if self.epsilons is not None:
            if len(self.epsilons) < 4 or any(not e > 0 for e in self.epsilons):
                raise ConfigError("epsilons: need >= 4 positive values")
            if math.log10(max(self.epsilons) / min(self.epsilons)) < 3:
                raise ConfigError("epsilons: grid must span >= 3 decades")
        if self.estimator not in ("diffusive", "incremental"):
            raise ConfigError(f"estimator: unknown {self.estimator!r}")
        if not self.budgets or any(k < 1 for k in self.budgets):
            raise ConfigError("budgets: need positive integers")
        if self.w_max is not None and self.w_max < 0:
            raise ConfigError("w_max: must be >= 0")
        if self.w_max_rule not in ("noise", "nominal"):
            raise ConfigError(f"w_max_rule: unknown {self.w_max_rule!r}")
        if self.gamma is not None and self.gamma < 0:
            raise ConfigError("gamma: must be >= 0")
        if self.block_sizes is not None and any(k < 1 for k in self.block_sizes):
            raise ConfigError("block_sizes: need positive integers")
        if self.kind == "solve" and not (self.grid_file and self.measurement_file):
            raise ConfigError("grid_file: solve needs grid_file and measurement_file")

    def echo(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                s = "none"
            elif isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, list):
                s = ", ".join(repr(x) for x in v)
            else:
                s = repr(v) if isinstance(v, float) else str(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"


_PARSERS: dict[str, Callable[[str], Any]] = {
    "kind": str, "seed": int, "a": int, "b": int, "buses": int, "branches": int,
    "monitors": int, "sigma": float, "epsilon": float, "epsilons": _float_list,
    "estimator": str, "trials": int, "budgets": _int_list, "clean_snapshots": int,
    "stream_length": int, "w_max": float, "w_max_rule": str, "gamma": float,
    "attack_monitor": int, "attack_row": int, "tracked": _int_list, "rows": int,
    "states": int, "block_sizes": _int_list, "compact": _bool, "grid_file": str,
    "measurement_file": str,
}
_NULLABLE = {"epsilon", "epsilons", "w_max", "gamma", "tracked", "block_sizes",
             "grid_file", "measurement_file"}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines strictly; unknown keys are errors."""
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _NULLABLE and value.lower() == "none":
            values[key] = None
            continue
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "kind" and values.get("kind", value) != value:
            raise ConfigError(f"kind: config says {values['kind']!r}, expected {value!r}")
        values[key] = value
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def load_config(path: str | Path | None, **overrides) -> ExperimentConfig:
    text = Path(path).read_text() if path is not None else ""
    return parse_config(text, **overrides)


@dataclass
class RunArtifact:
    config: ExperimentConfig
    tables: dict[str, str]
    summary: dict[str, Any]
    wall_clock: float = 0.0
    exit_code: int = 0

    def table_text(self, name: str) -> str:
        header = "".join(f"# {line}\n" for line in self.config.echo().splitlines())
        return header + self.tables[name]

    def write(self, out: str | Path) -> list[Path]:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name in self.tables:
            p = out / f"{name}.csv"
            p.write_text(self.table_text(name))
            written.append(p)
        p = out / "summary.json"
        payload = {"config": self.config.echo(), "summary": self.summary,
                   "wall_clock_s": self.wall_clock}
        p.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
        written.append(p)
        return written


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (set, frozenset)):
        return sorted(v)
    raise TypeError(type(v))


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _grid_model(cfg: ExperimentConfig, copies: int = 1):
    grid, areas = synthetic_grid(cfg.buses, cfg.branches, cfg.monitors, seed=cfg.seed)
    H = area_measurement_matrix(grid, areas, copies)
    part = area_partition(areas, copies)
    return grid, areas, H, part


# -- experiments -------------------------------------------------------------


def run_epsilon_sweep(cfg: ExperimentConfig) -> RunArtifact:
    """Relative gap between ``x_hat(eps)`` and the WLS estimate over an eps grid."""
    rng = np.random.default_rng([cfg.seed, 1])
    _, _, H, part = _grid_model(cfg)
    p, n = H.shape
    B = cfg.sigma * np.eye(p)
    Sigma = B @ B.T
    x = rng.normal(0.0, 0.1, n)
    z = H @ x + draw_noise(B, rng)
    x_wls = wls_oracle(H, Sigma, z).x
    if cfg.epsilons is None:
        s_min = float(np.linalg.svd(H, compute_uv=False)[-1])
        eps_grid = [s_min / cfg.sigma * 10.0**-k for k in range(1, 6)]
    else:
        eps_grid = sorted(cfg.epsilons, reverse=True)
    rows = []
    blocks = [(H[part.row_slice(i)], B[part.row_slice(i)], z[part.row_slice(i)])
              for i in range(part.monitor_count)]
    nw = float(np.linalg.norm(x_wls))
    for eps in eps_grid:
        x_eps = wls_incremental(blocks, eps)
        err = float(np.linalg.norm(x_eps - x_wls)) / nw
        predicted = float(np.linalg.norm(approximation_error_exact(H, B, z, eps))) / nw
        rows.append((eps, err, predicted))
    le = np.log10([r[0] for r in rows])
    lerr = np.log10([r[1] for r in rows])
    slope = float(np.polyfit(le, lerr, 1)[0])
    errs = [r[1] for r in rows]
    summary = {
        "states": n,
        "measurements": p,
        "slope": slope,
        "largest_eps_has_largest_error": bool(errs[0] == max(errs)),
        "smallest_eps_error": errs[-1],
        "monotone": bool(all(a >= b for a, b in zip(errs, errs[1:]))),
    }
    table = _csv(["epsilon", "relative_error", "predicted_relative_error"], rows)
    return RunArtifact(cfg, {"epsilon_sweep": table}, summary)


def run_measurement_sweep(cfg: ExperimentConfig) -> RunArtifact:
    """Mean estimation error as every monitor adds redundant measurement copies."""
    rng = np.random.default_rng([cfg.seed, 2])
    grid, areas = synthetic_grid(cfg.buses, cfg.branches, cfg.monitors, seed=cfg.seed)
    n = grid.state_dim
    X = rng.normal(0.0, 0.1, (n, cfg.trials))
    rows = []
    for k in cfg.budgets:
        H = area_measurement_matrix(grid, areas, k)
        part = area_partition(areas, k)
        p = H.shape[0]
        B = cfg.sigma * np.eye(p)
        Z = H @ X + draw_noise(B, np.random.default_rng([cfg.seed, 2, k]), size=cfg.trials)
        eps = cfg.epsilon if cfg.epsilon is not None else default_epsilon(H, B)
        blocks = [(H[part.row_slice(i)], B[part.row_slice(i)], Z[part.row_slice(i)])
                  for i in range(part.monitor_count)]
        X_hat = wls_incremental(blocks, eps)
        err = np.linalg.norm(X_hat - X, axis=0)
        rows.append((k, p, float(err.mean()), float(err.std(ddof=1)) if err.size > 1 else 0.0))
    means = [r[2] for r in rows]
    stds = [r[3] for r in rows]
    summary = {
        "base_measurements": n,
        "monitors": cfg.monitors,
        "means": means,
        "strict_decrease_first_to_last": bool(means[-1] < means[0]),
        "monotone_within_std": bool(
            all(b <= a + s for a, b, s in zip(means, means[1:], stds))
        ),
    }
    table = _csv(["budget", "measurements", "mean_error", "std_error"], rows)
    return RunArtifact(cfg, {"measurement_sweep": table}, summary)


def run_detection_experiment(cfg: ExperimentConfig) -> RunArtifact:
    """Clean and attacked measurement streams through the residual test.

    Every region measures each of its buses twice.  One attacked trial is a
    stream of ``stream_length`` snapshots with a fresh uniform injection on
    the same measurement at every step; the trial counts as detected if any
    snapshot alarms.
    """
    rng = np.random.default_rng([cfg.seed, 3])
    _, _, H, part = _grid_model(cfg, copies=2)
    p, n = H.shape
    m = part.monitor_count
    B = cfg.sigma * np.eye(p)
    Sigma = B @ B.T
    gain = residual_gain_norm(H, Sigma)
    gamma = cfg.gamma if cfg.gamma is not None else threshold_gamma(H, Sigma, cfg.sigma)
    eps = cfg.epsilon if cfg.epsilon is not None else default_epsilon(H, B)
    models = [MonitorModel(H[part.row_slice(i)], B[part.row_slice(i)]) for i in range(m)]
    graph = monitor_graph_from_blocks(H, part) if cfg.estimator == "diffusive" else None
    if not 0 <= cfg.attack_monitor < m:
        raise ConfigError(f"attack_monitor: {cfg.attack_monitor} out of range")
    if not 0 <= cfg.attack_row < part.row_sizes[cfg.attack_monitor]:
        raise ConfigError(f"attack_row: {cfg.attack_row} out of range")

    Xc = rng.normal(0.0, 0.1, (n, cfg.clean_snapshots))
    Zc = H @ Xc + draw_noise(B, rng, size=cfg.clean_snapshots, bounded=True)
    clean = detect_stream(models, Zc, eps, gamma, graph=graph, estimator=cfg.estimator)

    total = cfg.trials * cfg.stream_length
    Xa = rng.normal(0.0, 0.1, (n, total))
    Za = H @ Xa + draw_noise(B, rng, size=total, bounded=True)
    attacked_row = int(part.row_offsets[cfg.attack_monitor]) + cfg.attack_row
    if cfg.w_max is not None:
        w_max = cfg.w_max
    elif cfg.w_max_rule == "noise":
        w_max = 10.0 * cfg.sigma * gain
    else:
        w_max = 0.1 * float(np.mean(np.abs(H[attacked_row] @ Xa)))
    wrng = np.random.default_rng([cfg.seed, 4])
    for t in range(total):
        Za[:, t], _ = inject_false_data(
            Za[:, t], cfg.attack_monitor, cfg.attack_row, w_max, wrng, part.row_sizes
        )
    attacked = detect_stream(models, Za, eps, gamma, graph=graph, estimator=cfg.estimator)

    L = cfg.stream_length
    detected = [any(r.alarm_raised for r in attacked[k * L : (k + 1) * L])
                for k in range(cfg.trials)]
    alarmed = [r for r in attacked if r.alarm_raised]
    summary = {
        "gamma": gamma,
        "residual_gain_inf": gain,
        "epsilon": eps,
        "w_max": w_max,
        "false_alarms": sum(r.alarm_raised for r in clean),
        "clean_snapshots": len(clean),
        "detection_rate": sum(detected) / cfg.trials,
        "snapshot_detection_rate": len(alarmed) / total,
        "alarms_including_attacked_region": sum(cfg.attack_monitor in r.alarms for r in alarmed),
        "alarmed_snapshots": len(alarmed),
        "alarms_outside_attacked_region": sum(
            bool(r.alarms - {cfg.attack_monitor}) for r in alarmed
        ),
    }
    any_alarm = summary["false_alarms"] > 0 or len(alarmed) > 0
    tables = {"detection_clean": detection_csv(clean),
              "detection_corrupted": detection_csv(attacked)}
    return RunArtifact(cfg, tables, summary, exit_code=1 if any_alarm else 0)


def default_tracked(b: int) -> list[int]:
    """Monitors tracked in the lattice study: corner, two interior, far edge.

    For ``b = 4`` these are monitors 1, 6, 11 and 15 counted from one.
    """
    if b == 4:
        return [0, 5, 10, 14]
    m = b * b
    picks = [0, min(b + 1, m - 1), (b // 2) * b + b // 2, m - 2 if m > 1 else 0]
    return sorted(set(picks))


def run_lattice_decay(cfg: ExperimentConfig) -> RunArtifact:
    """Local error of each monitor after ``h`` rounds, ``h = 0..diameter``."""
    rng = np.random.default_rng([cfg.seed, 5])
    grid, part, graph = lattice_grid(cfg.a, cfg.b)
    H = dc_measurement_matrix(grid)
    x = rng.standard_normal(H.shape[1])
    z = H @ x
    nodes = make_nodes([(H[part.row_slice(i)], z[part.row_slice(i)])
                        for i in range(part.monitor_count)])
    d = graph.diameter
    run = truncated_sweep(nodes, graph, d, part.state_blocks)
    final = run.full[d]
    tracked = cfg.tracked if cfg.tracked is not None else default_tracked(cfg.b)
    if any(not 0 <= i < part.monitor_count for i in tracked):
        raise ConfigError("tracked: monitor index out of range")
    records = []
    for i in range(part.monitor_count):
        for h in range(d + 1):
            records.append((i, h, local_error(final[i], run.full[h][i], part.state_blocks[i])))
    fits = {}
    for i in tracked:
        errs = [(h, e) for j, h, e in records if j == i]
        emax = max(e for _, e in errs)
        try:
            f = decay_fit(errs, floor=1e-9 * emax)
        except Exception as exc:  # reported, not fatal
            fits[i] = {"error": str(exc)}
            continue
        used = [(h, e) for h, e in errs if e > 1e-9 * emax]
        fits[i] = {
            "C": f.C, "q": f.q, "misfit_decades": f.misfit, "C_envelope": f.C_envelope,
            "points": f.points,
            "envelope_dominates": bool(all(e <= f.envelope(h) * (1 + 1e-12) for h, e in used)),
            "error_at_diameter": next(e for h, e in errs if h == d),
        }
    layout = BlockLayout.from_matrix(H, part)
    table = verify_pinv_decay(H, layout)
    pfit = table.fit
    summary = {
        "buses": grid.bus_count,
        "monitors": part.monitor_count,
        "diameter": d,
        "tracked": tracked,
        "fits": {str(k): v for k, v in fits.items()},
        "max_error_at_diameter": max(e for _, h, e in records if h == d),
        "pinv_decay_fit": None if pfit is None else {"C": pfit.C, "q": pfit.q,
                                                     "misfit_decades": pfit.misfit},
    }
    tables = {"decay": decay_csv(records), "pinv_decay": pinv_decay_csv(table)}
    return RunArtifact(cfg, tables, summary)


def run_complexity_counts(cfg: ExperimentConfig) -> RunArtifact:
    """Instrumented incremental runs for several block sizes."""
    m = cfg.rows
    sys = random_consistent_system(cfg.states, 1, seed=cfg.seed, rows=m)
    sizes = cfg.block_sizes or sorted({1, 2, max(m // 2, 1), m})
    rows = []
    for k in sizes:
        blocks = [(sys.H[s : s + k], sys.z[s : s + k]) for s in range(0, m, k)]
        res = run_incremental(blocks, compact=cfg.compact)
        expected = communications_expected(m, k)
        if res.communications != expected:
            raise AlgorithmFailure(
                f"block size {k}: {res.communications} communications, expected {expected}"
            )
        rows.append((k, len(blocks), res.communications, expected, res.flop_surrogate,
                     sum(res.wire_sizes)))
    summary = {"rows": m, "states": cfg.states,
               "communications": {str(r[0]): r[2] for r in rows}}
    table = _csv(["block_size", "monitors", "communications", "expected",
                  "flop_surrogate", "wire_size"], rows)
    return RunArtifact(cfg, {"complexity": table}, summary)


# -- one-shot solve ----------------------------------------------------------


@dataclass
class MeasurementFile:
    sigma: float
    records: list[tuple[int, int, float]]  # (monitor, bus, value)


def parse_measurements(text: str) -> MeasurementFile:
    """``sigma <s>`` header plus ``meas <monitor> <bus> <value>`` lines."""
    sigma = None
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "sigma" and len(parts) == 2:
                sigma = float(parts[1])
                if not sigma > 0 or not math.isfinite(sigma):
                    raise ConfigError(f"line {lineno}: sigma must be positive")
            elif parts[0] == "meas" and len(parts) == 4:
                val = float(parts[3])
                if not math.isfinite(val):
                    raise ValueError(parts[3])
                records.append((int(parts[1]), int(parts[2]), val))
            else:
                raise ConfigError(f"line {lineno}: unrecognized record {line!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: malformed number in {line!r}") from exc
    if sigma is None:
        raise ConfigError("missing 'sigma' header")
    if not records:
        raise ConfigError("no 'meas' records")
    monitors = sorted({r[0] for r in records})
    if monitors != list(range(len(monitors))):
        raise ConfigError(f"monitor ids must be 0..m-1, got {monitors}")
    return MeasurementFile(sigma, records)


def format_measurements(mf: MeasurementFile) -> str:
    lines = [f"sigma {mf.sigma!r}"]
    lines += [f"meas {i} {k} {v!r}" for i, k, v in mf.records]
    return "\n".join(lines) + "\n"


def run_solve(cfg: ExperimentConfig) -> RunArtifact:
    grid = read_grid(cfg.grid_file)
    mf = parse_measurements(Path(cfg.measurement_file).read_text())
    for i, k, _ in mf.records:
        if not 0 <= k < grid.bus_count:
            raise ConfigError(f"measurement at unknown bus {k}")
    recs = sorted(mf.records, key=lambda r: r[0])  # stable: keeps file order per monitor
    m = recs[-1][0] + 1
    H = injection_rows(grid, [k for _, k, _ in recs])
    z = np.array([v for _, _, v in recs])
    if np.linalg.matrix_rank(H) < H.shape[1]:
        raise ConfigError("measurements do not determine every bus angle")
    sizes = [sum(1 for r in recs if r[0] == i) for i in range(m)]
    B = mf.sigma * np.eye(len(z))
    eps = cfg.epsilon if cfg.epsilon is not None else default_epsilon(H, B)
    off = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    sl = [slice(off[i], off[i + 1]) for i in range(m)]
    blocks = [(H[s], B[s], z[s]) for s in sl]
    if cfg.estimator == "incremental" or m == 1:
        x_hat = wls_incremental(blocks, eps)
    else:
        regions = [sorted({k - 1 for i, k, _ in recs if i == j and k != REFERENCE_BUS})
                   for j in range(m)]
        graph = monitor_graph_from_blocks(H, RegionPartition(sizes, regions))
        x_hat = run_synchronous(make_nodes(blocks, eps), graph).nodes[0].state
    bias = float(np.linalg.norm(approximation_error_exact(H, B, z, eps)))
    residuals = [float(np.max(np.abs(z[s] - H[s] @ x_hat), initial=0.0)) for s in sl]
    angles = np.concatenate([[0.0], x_hat])
    summary = {"epsilon": eps, "bias_bound": bias, "monitors": m,
               "measurements": len(z), "residuals": residuals}
    tables = {
        "estimate": _csv(["bus", "angle"], [(k, float(a)) for k, a in enumerate(angles)]),
        "residuals": _csv(["monitor", "residual"], list(enumerate(residuals))),
    }
    return RunArtifact(cfg, tables, summary)


RUNNERS: dict[str, Callable[[ExperimentConfig], RunArtifact]] = {
    "solve": run_solve,
    "epsilon_sweep": run_epsilon_sweep,
    "measurement_sweep": run_measurement_sweep,
    "detection": run_detection_experiment,
    "lattice_decay": run_lattice_decay,
    "complexity_counts": run_complexity_counts,
}


def run_experiment(cfg: ExperimentConfig) -> RunArtifact:
    cfg.validate()
    t0 = time.perf_counter()
    art = RUNNERS[cfg.kind](cfg)
    art.wall_clock = time.perf_counter() - t0
    log.info("%s finished in %.2fs", cfg.kind, art.wall_clock)
    return art
