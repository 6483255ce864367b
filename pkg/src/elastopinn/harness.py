"""Training orchestration, error metrics and result export."""

from __future__ import annotations

import ctypes
import ctypes.util
import functools
import io
import json
import logging
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from . import mechanics as mech
from .autodiff import forward_jets
from .loss import LOSS_KINDS, loss_objective, make_head
from .network import FieldModel, serialize_model
from .optimizer import HistoryEntry, OptOptions, minimize
from .problems import PROBLEM_NAMES, ProblemSpec, build_problem

log = logging.getLogger("elastopinn")

AXES = "xyz"
DISP_NAMES = {1: ("u",), 2: ("U", "V"), 3: ("U", "V", "W")}
# Stopping rule per loss: (relative decrease tolerance, consecutive steps).
# The sampled potential energy is unbounded below for a flexible network
# (a steep layer between grid points hides strain from the quadrature), so
# energy runs stop at the first stationary plateau with the classic
# factr = 1e7 rule instead of the strict collocation default.
STOPPING = {"collocation": (1e-12, 3), "energy": (1e7 * np.finfo(float).eps, 1)}
# Voigt order; shear strains are engineering strains (2 eps_ab)
VOIGT = {1: [(0, 0)], 2: [(0, 0), (1, 1), (0, 1)], 3: [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]}


class TrainingDiverged(RuntimeError):
    pass


def rms_error(truth, pred) -> float:
    """Mean squared pointwise error normalized by max |truth|."""
    truth = np.asarray(truth, dtype=np.float64).ravel()
    pred = np.asarray(pred, dtype=np.float64).ravel()
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.size} vs {pred.size}")
    scale = np.max(np.abs(truth), initial=0.0)
    if scale == 0:
        raise ValueError("ground-truth field is identically zero; normalizer undefined")
    return float(np.mean(((truth - pred) / scale) ** 2))


def field_columns(dim: int) -> list[str]:
    cols = list(AXES[:dim]) + list(DISP_NAMES[dim])
    for a, b in VOIGT[dim]:
        cols.append(f"eps_{AXES[a]}" if a == b else f"gamma_{AXES[a]}{AXES[b]}")
    for a, b in VOIGT[dim]:
        cols.append(f"sigma_{AXES[a]}" if a == b else f"tau_{AXES[a]}{AXES[b]}")
    return cols


@dataclass
class FieldSnapshot:
    columns: list[str]
    data: np.ndarray

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]


def _snapshot_from(x: np.ndarray, u: np.ndarray, eps: np.ndarray, sigma: np.ndarray) -> FieldSnapshot:
    dim = x.shape[1]
    strain = [eps[:, a, b] * (1.0 if a == b else 2.0) for a, b in VOIGT[dim]]
    stress = [sigma[:, a, b] for a, b in VOIGT[dim]]
    data = np.column_stack([x, u, *strain, *stress])
    return FieldSnapshot(field_columns(dim), data)


def evaluate_fields(model: FieldModel, problem: ProblemSpec, x: Optional[np.ndarray] = None) -> FieldSnapshot:
    x = problem.points if x is None else x
    jets, _ = forward_jets(model, x, order=1)
    state = mech.stress_state(jets.du, problem.material)
    return _snapshot_from(x, jets.u, state.strain, state.stress)


def oracle_fields(problem: ProblemSpec, x: Optional[np.ndarray] = None) -> FieldSnapshot:
    if problem.oracle is None:
        raise ValueError(f"problem {problem.name} has no analytic solution")
    x = problem.points if x is None else x
    o = problem.oracle
    return _snapshot_from(x, o.displacement(x), o.strain(x), o.stress(x))


def rms_table(truth: FieldSnapshot, pred: FieldSnapshot, zero_tol: float = 1e-12) -> dict[str, Optional[float]]:
    """RMS error per field column; ``None`` where the truth field is zero.

    A field counts as zero when its peak is below ``zero_tol`` times the
    largest truth value: closed forms such as sigma_y = lam tr(eps) + 2 mu eps_y
    leave round-off of order 1e-17 where the exact value vanishes.
    """
    dim = sum(c in AXES for c in truth.columns)
    peak = np.max(np.abs(truth.data[:, dim:]), initial=0.0)
    out: dict[str, Optional[float]] = {}
    for c in truth.columns[dim:]:
        t = truth[c]
        out[c] = None if np.max(np.abs(t)) <= zero_tol * peak else rms_error(t, pred[c])
    return out


@dataclass
class RunConfig:
    problem: str
    loss: str = "collocation"
    seed: int = 0
    hidden_layers: Optional[tuple[int, ...]] = None
    points_per_axis: Optional[int] = None
    shared_network: bool = False
    max_iterations: int = 5000
    grad_tol: float = 1e-8
    rel_loss_tol: Optional[float] = None
    loss_window: Optional[int] = None
    memory: int = 10
    log_every: int = 10
    threads: int = 1
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.problem not in PROBLEM_NAMES:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEM_NAMES)}")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.loss!r}; choose from {', '.join(LOSS_KINDS)}")
        if self.seed < 0 or self.threads < 1:
            raise ValueError("seed must be >= 0 and threads >= 1")
        if self.hidden_layers is not None:
            self.hidden_layers = tuple(int(n) for n in self.hidden_layers)

    def options(self) -> OptOptions:
        tol, window = STOPPING[self.loss]
        return OptOptions(memory=self.memory, max_iterations=self.max_iterations,
                          grad_tol=self.grad_tol,
                          rel_loss_tol=tol if self.rel_loss_tol is None else self.rel_loss_tol,
                          loss_window=window if self.loss_window is None else self.loss_window,
                          log_every=self.log_every)


@dataclass
class TrainReport:
    problem: str
    loss: str
    seed: int
    status: str
    iterations: int
    n_evaluations: int
    converged_by: Optional[str]
    final_loss: float
    final_terms: dict
    wall_seconds: float
    cpu_seconds: float
    n_points: int
    n_params: int
    rms: dict = field(default_factory=dict)
    loss_history: list = field(default_factory=list)
    config: dict = field(default_factory=dict)


@dataclass
class RunResult:
    report: TrainReport
    model: FieldModel
    problem: ProblemSpec
    snapshot: FieldSnapshot


def _atomic_write(path: Path, payload: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_fields(snapshot: FieldSnapshot, path) -> None:
    buf = io.StringIO()
    np.savetxt(buf, snapshot.data, fmt="%.17g", delimiter=",", header=",".join(snapshot.columns), comments="")
    _atomic_write(Path(path), buf.getvalue().encode("ascii"))


def read_fields(path) -> FieldSnapshot:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return FieldSnapshot(header, data)


def export_report(report: TrainReport, path) -> None:
    text = json.dumps(asdict(report), indent=2, allow_nan=True)
    _atomic_write(Path(path), (text + "\n").encode("utf-8"))


def read_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _history_rows(history: list[HistoryEntry]) -> list[dict]:
    return [{"iteration": h.iteration, "total": h.total, **h.terms} for h in history]


def _log_progress(entry: HistoryEntry):
    terms = "  ".join(f"{k} {v:.4e}" for k, v in entry.terms.items())
    log.info("iter %5d  loss %.6e  %s", entry.iteration, entry.total, terms)


@functools.lru_cache(maxsize=None)
def retain_heap() -> bool:
    """Keep freed jet buffers in the glibc heap instead of unmapping them.

    Every evaluation allocates and frees the same multi-megabyte layer
    arrays; above glibc's default mmap threshold each one is returned to the
    OS and faulted back in, which costs about as much as the arithmetic.
    No-op (returns False) on other C libraries.
    """
    name = ctypes.util.find_library("c")
    if not name:
        return False
    try:
        mallopt = ctypes.CDLL(name).mallopt
    except (OSError, AttributeError):
        return False
    m_trim_threshold, m_mmap_threshold = -1, -3
    return bool(mallopt(m_mmap_threshold, 1 << 30)) and bool(mallopt(m_trim_threshold, 2**31 - 1))


def run(config: RunConfig) -> RunResult:
    """Build, train, evaluate and (optionally) export one configuration."""
    retain_heap()
    with threadpool_limits(limits=config.threads):
        return _run(config)


def _run(config: RunConfig) -> RunResult:
    problem = build_problem(config.problem, config.points_per_axis)
    model = problem.make_model(config.seed, config.hidden_layers, config.shared_network)
    head = make_head(config.loss, problem.samples, problem.material)
    objective = loss_objective(head, model)
    out = Path(config.out_dir) if config.out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    cfg_dict = asdict(config)
    t_wall, t_cpu = time.perf_counter(), time.process_time()
    try:
        res = minimize(objective, model.flat(), config.options(), callback=_log_progress)
    except ValueError as exc:
        report = TrainReport(config.problem, config.loss, config.seed, "diverged", 0, 1, None,
                             float("nan"), {}, time.perf_counter() - t_wall,
                             time.process_time() - t_cpu, problem.points.shape[0], model.n_params,
                             config=cfg_dict)
        if out is not None:
            export_report(report, out / "report.json")
        raise TrainingDiverged(str(exc)) from exc
    wall, cpu = time.perf_counter() - t_wall, time.process_time() - t_cpu

    trained = model.with_flat(res.x)
    snapshot = evaluate_fields(trained, problem)
    rms = rms_table(oracle_fields(problem), snapshot) if problem.oracle is not None else {}
    report = TrainReport(
        problem=config.problem, loss=config.loss, seed=config.seed,
        status="ok" if np.isfinite(res.final_loss) else "diverged",
        iterations=res.iterations, n_evaluations=res.n_evaluations, converged_by=res.converged_by,
        final_loss=res.final_loss, final_terms=res.terms, wall_seconds=wall, cpu_seconds=cpu,
        n_points=problem.points.shape[0], n_params=model.n_params, rms=rms,
        loss_history=_history_rows(res.loss_history), config=cfg_dict,
    )
    log.info("%s/%s: %d iterations (%s), loss %.6e, %.2f s", config.problem, config.loss,
             res.iterations, res.converged_by, res.final_loss, wall)
    if out is not None:
        export_fields(snapshot, out / "fields.csv")
        export_report(report, out / "report.json")
        _atomic_write(out / "model.json", serialize_model(trained))
    if report.status != "ok":
        raise TrainingDiverged(f"final loss is {res.final_loss}")
    return RunResult(report, trained, problem, snapshot)
