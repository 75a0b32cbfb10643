"""Benchmark report tables: certified sup gains and error bounds.

Two tables are produced over the bundled benchmarks.  The sup-gain table
has one row per criterion and one column per benchmark, optionally followed
by classification rows giving the Monte Carlo verdict (C bounded, N
diverged, - not applicable) at the per-criterion working gain.  The
error-bound table fixes the working gain from the identity-certificate
criterion and reports the maximal certified rate, the asymptotic bounds of
the three bound-producing criteria, and the simulated terminal error.

Cells are kept as raw values and formatted at serialization time: full
precision (shortest round-trip) in CSV, four decimals in text mode, and
null-with-flag for infinities in JSON lines.  Non-numeric outcomes
(inapplicable criteria, skipped computations) render as annotated text in
the cell rather than being dropped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import presets
from .bounds import (CriterionKind, GainTooLarge, SupGainResult,
                     asymptotic_bound, max_chi_search, protocol_gain, sup_gain)
from .moments import MomentModel
from .simulate import SimConfig, SimResult, run_lms

CRITERIA_ORDER = (
    CriterionKind.THEOREM1,
    CriterionKind.COROLLARY2,
    CriterionKind.WIDROW_LAMBDA_MAX,
    CriterionKind.WIDROW_TRACE,
    CriterionKind.ZHU,
)


@dataclass
class Cell:
    """One table cell: a number, a text annotation, or both (number + note)."""

    value: Optional[float] = None
    text: str = ""
    note: str = ""

    def render(self, precision: Optional[int] = None) -> str:
        if self.text:
            return self.text
        if self.value is None:
            return ""
        if math.isinf(self.value):
            return "Inf" if self.value > 0 else "-Inf"
        if precision is None:
            return repr(float(self.value))
        return f"{self.value:.{precision}f}"

    def to_json(self) -> dict:
        out: dict = {}
        if self.value is None:
            out["value"] = None
            if self.text:
                out["text"] = self.text
        elif math.isinf(self.value):
            out["value"] = None
            out["infinite"] = True
        else:
            out["value"] = float(self.value)
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple[str, list[Cell]]] = field(default_factory=list)

    def add_row(self, label: str, cells: Sequence[Cell]) -> None:
        if len(cells) != len(self.columns):
            raise ValueError(
                f"row {label!r} has {len(cells)} cells, table has "
                f"{len(self.columns)} columns")
        self.rows.append((label, list(cells)))

    def row(self, label: str) -> list[Cell]:
        for row_label, cells in self.rows:
            if row_label == label:
                return cells
        raise KeyError(f"no row {label!r} in table {self.name}")

    def to_csv(self) -> str:
        lines = ["row," + ",".join(self.columns)]
        for label, cells in self.rows:
            lines.append(label + "," + ",".join(c.render() for c in cells))
        return "\n".join(lines) + "\n"

    def to_text(self, precision: int = 4) -> str:
        header = ["row"] + list(self.columns)
        body = [[label] + [c.render(precision) for c in cells]
                for label, cells in self.rows]
        widths = [max(len(r[i]) for r in [header] + body)
                  for i in range(len(header))]
        def fmt(row: list[str]) -> str:
            return "  ".join(s.ljust(w) for s, w in zip(row, widths)).rstrip()
        return "\n".join([fmt(header)] + [fmt(r) for r in body]) + "\n"

    def to_jsonl(self) -> str:
        lines = []
        for label, cells in self.rows:
            lines.append(json.dumps({
                "table": self.name,
                "row": label,
                "cells": {col: cell.to_json()
                          for col, cell in zip(self.columns, cells)},
            }, sort_keys=True))
        return "\n".join(lines) + "\n"

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv(), newline="\n")


def supgain_results(names: Sequence[str] = presets.BENCHMARK_NAMES,
                    criteria: Sequence[CriterionKind] = CRITERIA_ORDER,
                    mode: str = "relaxed",
                    models: Optional[dict[str, MomentModel]] = None,
                    ) -> dict[tuple[str, CriterionKind], Optional[SupGainResult]]:
    """Sup gains for every (benchmark, criterion) pair; None marks a skip.

    A criterion that needs fourth-moment evaluations at general P (the
    free-matrix certificate) is skipped for printed-moments models.
    """
    if models is None:
        models = {name: presets.benchmark_model(name) for name in names}
    out: dict[tuple[str, CriterionKind], Optional[SupGainResult]] = {}
    for name in names:
        model = models[name]
        for kind in criteria:
            if kind is CriterionKind.THEOREM1 and not model.supports_general_p:
                out[(name, kind)] = None
                continue
            out[(name, kind)] = sup_gain(model, kind, mode=mode)
    return out


def _supgain_cell(result: Optional[SupGainResult]) -> Cell:
    if result is None:
        return Cell(text="skipped",
                    note="free-matrix certificates need a fourth-moment "
                         "operator; this model carries printed matrices only")
    note = result.note
    if result.tolerance_limited:
        note = (note + "; " if note else "") + "tolerance-limited"
    return Cell(value=result.sup_gain, note=note)


def build_supgain_table(
        names: Sequence[str] = presets.BENCHMARK_NAMES,
        criteria: Sequence[CriterionKind] = CRITERIA_ORDER,
        mode: str = "relaxed",
        annotations: Optional[dict[tuple[str, CriterionKind], str]] = None,
        results: Optional[dict[tuple[str, CriterionKind],
                               Optional[SupGainResult]]] = None) -> Table:
    """Criterion-by-benchmark sup-gain table, plus classification rows if given."""
    if results is None:
        results = supgain_results(names, criteria, mode=mode)
    table = Table("supgain", tuple(names))
    for kind in criteria:
        table.add_row(kind.value,
                      [_supgain_cell(results[(name, kind)]) for name in names])
    if annotations is not None:
        for kind in criteria:
            cells = [Cell(text=annotations.get((name, kind), ""))
                     for name in names]
            table.add_row(kind.value + "_classification", cells)
    return table


_CLASS_LETTER = {"bounded": "C", "diverged": "N", "indeterminate": "?"}


def _protocol_star(dim: int) -> np.ndarray:
    star = presets.THETA_STAR
    return star if star.shape[0] == dim else np.ones(dim)


def _protocol_init(dim: int, master_seed: int) -> np.ndarray:
    return presets.protocol_init(master_seed, dim)


def classification_annotations(
        results: dict[tuple[str, CriterionKind], Optional[SupGainResult]],
        names: Sequence[str] = presets.BENCHMARK_NAMES,
        criteria: Sequence[CriterionKind] = CRITERIA_ORDER,
        models: Optional[dict[str, MomentModel]] = None,
        xi: float = presets.XI,
        sigma_eps: float = presets.SIGMA_EPS,
        theta_star: Optional[np.ndarray] = None,
        init: Union[str, np.ndarray, None] = None,
        k_max: int = presets.K_MAX,
        replications: int = presets.REPLICATIONS,
        master_seed: int = presets.DEFAULT_MASTER_SEED,
        ) -> dict[tuple[str, CriterionKind], str]:
    """Monte Carlo verdict letter per (benchmark, criterion) working gain.

    C: replication-averaged terminal error below the bounded threshold;
    N: above the diverged threshold; -: criterion not applicable (zero
    gain or unsamplable model); ?: in between.  Simulations are memoized
    on (benchmark, gain) since criteria frequently share a working gain.
    """
    out: dict[tuple[str, CriterionKind], str] = {}
    memo: dict[tuple[str, float], SimResult] = {}
    for name in names:
        model = (models or {}).get(name) or presets.benchmark_model(name)
        if model.sampling_cov is None:
            continue
        star = _protocol_star(model.dim) if theta_star is None else theta_star
        start = _protocol_init(model.dim, master_seed) if init is None else init
        for kind in criteria:
            result = results.get((name, kind))
            if result is None:
                continue
            if result.inapplicable or result.strictly_infeasible:
                out[(name, kind)] = "-"
                continue
            try:
                gain = protocol_gain(result.sup_gain, xi)
            except GainTooLarge:
                out[(name, kind)] = "-"
                continue
            key = (name, round(gain, 12))
            if key not in memo:
                memo[key] = run_lms(SimConfig(
                    model=model, theta_star=star, gain=gain,
                    sigma_eps=sigma_eps, k_max=k_max,
                    replications=replications, master_seed=master_seed,
                    init=start))
            out[(name, kind)] = _CLASS_LETTER[memo[key].classification]
    return out


def build_errorbound_table(
        names: Sequence[str] = ("1A", "1B", "1C", "1D"),
        mode: str = "relaxed",
        xi: float = presets.XI,
        sigma_eps: float = presets.SIGMA_EPS,
        theta_star: Optional[np.ndarray] = None,
        init: Union[str, np.ndarray, None] = None,
        k_max: int = presets.K_MAX,
        replications: int = presets.REPLICATIONS,
        master_seed: int = presets.DEFAULT_MASTER_SEED,
        simulate: bool = True,
        models: Optional[dict[str, MomentModel]] = None) -> Table:
    """Error-bound table at the identity-certificate working gain per benchmark.

    Rows: the working gain, the maximal certified rates (free-matrix and
    identity certificates), the three asymptotic bounds, the Monte Carlo
    terminal error, and a flag row marking tolerance-limited certificates.
    """
    table = Table("errorbound", tuple(names))
    gains: list[Cell] = []
    chi_t1: list[Cell] = []
    chi_c2: list[Cell] = []
    bound_t1: list[Cell] = []
    bound_c2: list[Cell] = []
    bound_zhu: list[Cell] = []
    sim_row: list[Cell] = []
    flags: list[Cell] = []
    for name in names:
        model = (models or {}).get(name) or presets.benchmark_model(name)
        star = _protocol_star(model.dim) if theta_star is None else theta_star
        start = _protocol_init(model.dim, master_seed) if init is None else init
        base = sup_gain(model, CriterionKind.COROLLARY2, mode=mode)
        gain = protocol_gain(base.sup_gain, xi)
        gains.append(Cell(value=gain))
        flag_parts = []

        c2 = max_chi_search(model, CriterionKind.COROLLARY2, gain, mode=mode)
        chi_c2.append(Cell(value=c2.chi))
        bound_c2.append(Cell(value=asymptotic_bound(
            CriterionKind.COROLLARY2, gain, c2.chi, None,
            model.second_moment, sigma_eps)))
        if c2.tolerance_limited:
            flag_parts.append("corollary2 tolerance-limited")

        if model.supports_general_p:
            t1 = max_chi_search(model, CriterionKind.THEOREM1, gain, mode=mode)
            chi_t1.append(Cell(value=t1.chi))
            bound_t1.append(Cell(value=asymptotic_bound(
                CriterionKind.THEOREM1, gain, t1.chi, t1.p_matrix,
                model.second_moment, sigma_eps)))
            if t1.tolerance_limited:
                flag_parts.append("theorem1 tolerance-limited")
        else:
            chi_t1.append(Cell(text="skipped"))
            bound_t1.append(Cell(
                text="skipped",
                note="free-matrix certificates need a fourth-moment operator"))

        bound_zhu.append(Cell(value=asymptotic_bound(
            CriterionKind.ZHU, gain, None, None,
            model.second_moment, sigma_eps)))

        if simulate and model.sampling_cov is not None:
            sim = run_lms(SimConfig(
                model=model, theta_star=star, gain=gain, sigma_eps=sigma_eps,
                k_max=k_max, replications=replications,
                master_seed=master_seed, init=start))
            sim_row.append(Cell(value=sim.terminal_mse))
        else:
            sim_row.append(Cell())
        flags.append(Cell(text="; ".join(flag_parts)))

    table.add_row("gain", gains)
    table.add_row("chi_theorem1", chi_t1)
    table.add_row("chi_corollary2", chi_c2)
    table.add_row("theorem1", bound_t1)
    table.add_row("corollary2", bound_c2)
    table.add_row("zhu_criterion", bound_zhu)
    if simulate:
        table.add_row("simulation", sim_row)
    table.add_row("flags", flags)
    return table


def write_benchmark_reports(out_dir: Union[str, Path],
                            mode: str = "relaxed",
                            master_seed: int = presets.DEFAULT_MASTER_SEED,
                            k_max: int = presets.K_MAX,
                            replications: int = presets.REPLICATIONS,
                            simulate: bool = True) -> tuple[Path, Path]:
    """Emit table3.csv (sup gains + classifications) and table4.csv (bounds)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = supgain_results(mode=mode)
    annotations = None
    if simulate:
        annotations = classification_annotations(
            results, master_seed=master_seed, k_max=k_max,
            replications=replications)
    table3 = build_supgain_table(results=results, annotations=annotations)
    table4 = build_errorbound_table(
        mode=mode, master_seed=master_seed, k_max=k_max,
        replications=replications, simulate=simulate)
    path3 = out_dir / "table3.csv"
    path4 = out_dir / "table4.csv"
    table3.write(path3)
    table4.write(path4)
    return path3, path4
