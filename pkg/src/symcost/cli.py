"""Scenario-driven batch runner.

Config files are JSON with a versioned schema tag::

    {
      "schema": "symcost/1",
      "master_seed": 0,
      "scenarios": [
        {"kind": "tradeoff", "scenario_id": "swap", "parameters": {...},
         "seeds": [1, 2], "optimizer_budget": [4, 200],
         "delta_choice": "d1", "output": "out/report.jsonl"}
      ]
    }

Every (scenario, seed) pair produces one JSON line shaped like a
TradeoffReport plus an "application" discriminator and kind-specific extras.
Wall-clock timing is isolated to a sidecar .meta.json so that equal seeds
give byte-identical reports.  Exit codes: 0 all slack >= -1e-7, 2 on any
violation, 1 on config/usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .channels import Implementation, MeasurementChannel, channel_of, dephasing_channel
from .rand import (
    generator,
    haar_unitary,
    random_conserving_implementation,
    random_density,
    random_hermitian,
    random_kraus_channel,
    random_mixed_ensemble,
    random_orthogonal_pure_ensemble,
    random_pure,
    random_thermal_implementation,
    random_violated_implementation,
)
from .recovery import optimize_recovery
from .scrambling import (
    ScrambleScenario,
    per_bit_tradeoff_check,
    run_scenario as run_scramble_scenario,
)
from .states import DensityMatrix, TestEnsemble, basis_state, von_neumann_entropy
from .tradeoff import (
    TradeoffReport,
    TradeoffViolation,
    check_entropy_production_bound,
    check_tradeoff_inequality,
    check_uncertainty_relation,
    entropy_production_beta,
    generalized_entropy_production,
    petz_error,
    petz_map,
)
from . import apps

SCHEMA = "symcost/1"
KINDS = ("tradeoff", "thermo", "petz", "scramble", "way", "gate", "nogo", "qec", "kr")
DELTA_CHOICES = ("d1", "d2", "d3", "def")
SLACK_TOL = 1e-7

_PAULI = {
    "pauli_x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "pauli_y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "pauli_z": np.diag([1.0, -1.0]).astype(np.complex128),
}


def _operator_from_spec(spec, rng=None) -> np.ndarray:
    """Small operator mini-language for config files."""
    if isinstance(spec, str):
        if spec in _PAULI:
            return _PAULI[spec].copy()
        if spec == "hadamard":
            return (_PAULI["pauli_x"] + _PAULI["pauli_z"]) / math.sqrt(2.0)
        raise ValueError(f"unknown operator spec {spec!r}")
    if isinstance(spec, dict):
        if "diag" in spec:
            return np.diag(np.array(spec["diag"], dtype=float)).astype(np.complex128)
        if "zero" in spec:
            return np.zeros((int(spec["zero"]),) * 2, dtype=np.complex128)
        if "matrix" in spec:
            rows = [[complex(c[0], c[1]) for c in row] for row in spec["matrix"]]
            return np.array(rows, dtype=np.complex128)
        if "haar_unitary" in spec:
            if rng is None:
                raise ValueError("haar_unitary spec needs a seeded scenario")
            return haar_unitary(int(spec["haar_unitary"]), rng)
    raise ValueError(f"cannot parse operator spec {spec!r}")


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def _report_row(application: str, scenario_id: str, seed: int,
                report: TradeoffReport | None = None, **extras) -> dict:
    row = {
        "application": application,
        "scenario_id": scenario_id,
        "seed": seed,
        "c_value": 0.0,
        "delta_def": 0.0,
        "delta_1": 0.0,
        "delta_2": 0.0,
        "delta_3": 0.0,
        "fisher_B": 0.0,
        "delta_irrev": 0.0,
        "delta_irrev_T": 0.0,
        "delta_Z": 0.0,
        "lhs": 0.0,
        "rhs": 0.0,
        "slack": 0.0,
        "tight_variant_used": False,
    }
    if report is not None:
        d = report.to_dict(include_timing=False)
        d["scenario_id"] = scenario_id
        row.update(d)
    row.update(extras)
    row["pass"] = bool(row["slack"] >= -SLACK_TOL)
    return _jsonable(row)


# ---------------------------------------------------------------------------
# Scenario builders, one per kind.
# ---------------------------------------------------------------------------

def _swap_plus_implementation() -> tuple[Implementation, TestEnsemble]:
    swap = np.zeros((4, 4), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            swap[j * 2 + i, i * 2 + j] = 1.0
    z = _PAULI["pauli_z"]
    plus = DensityMatrix.from_vector(np.array([1, 1]) / math.sqrt(2))
    minus = DensityMatrix.from_vector(np.array([1, -1]) / math.sqrt(2))
    impl = Implementation(u=swap, env_state=plus, x_sys=z, x_env=z,
                          x_sys_out=z, x_env_out=z, dims=(2, 2, 2, 2))
    return impl, TestEnsemble((0.5, 0.5), (plus, minus))


def _dephasing_implementation() -> Implementation:
    cnot = np.eye(4, dtype=np.complex128)[[0, 1, 3, 2]]
    zero = np.zeros((2, 2), dtype=np.complex128)
    return Implementation(u=cnot, env_state=basis_state(2, 0), x_sys=_PAULI["pauli_z"],
                          x_env=zero, x_sys_out=_PAULI["pauli_z"], x_env_out=zero,
                          dims=(2, 2, 2, 2))


def _run_tradeoff(p: dict, scenario_id: str, seed: int, rng, budget, delta_choice) -> dict:
    variant = p.get("variant", "orthogonal")
    if p.get("preset") == "swap_plus":
        impl, ensemble = _swap_plus_implementation()
    else:
        d_sys, d_env = int(p.get("d_sys", 2)), int(p.get("d_env", 3))
        violation = float(p.get("violation_spread", 0.0))
        if violation > 0:
            impl = random_violated_implementation(
                d_sys, d_env, rng, violation_spread=violation,
                env_state=p.get("env_state", "haar_pure"))
        else:
            impl = random_conserving_implementation(
                d_sys, d_env, rng, env_state=p.get("env_state", "haar_pure"))
        n_states = int(p.get("n_states", 2))
        if variant == "orthogonal":
            ensemble = random_orthogonal_pure_ensemble(d_sys, n_states, rng)
        else:
            ensemble = random_mixed_ensemble(d_sys, n_states, rng)
    forward = channel_of(impl)
    opt = optimize_recovery(ensemble, forward, budget=budget, seed=rng)
    direct_budget = tuple(p.get("direct_budget", (16, 400)))
    try:
        report = check_tradeoff_inequality(
            ensemble, impl, opt.delta_upper, variant=variant, delta_choice=delta_choice,
            delta_irrev_T=opt.delta_t, scenario_id=scenario_id, seed=rng,
            direct_budget=direct_budget,
            include_direct=bool(p.get("include_direct", True)),
        )
    except TradeoffViolation as exc:
        if exc.report is None:
            raise
        report = exc.report
    bias = float(p.get("debug_lhs_bias", 0.0))
    row = _report_row("tradeoff", scenario_id, seed, report)
    if bias:
        row["lhs"] = row["lhs"] + bias
        row["slack"] = row["rhs"] - row["lhs"]
        row["pass"] = bool(row["slack"] >= -SLACK_TOL)
    return row


def _run_thermo(p: dict, scenario_id: str, seed: int, rng, budget, delta_choice) -> dict:
    beta = float(p.get("beta", 1.0))
    if p.get("preset") == "dephasing_ln2":
        impl = _dephasing_implementation()
        rho = DensityMatrix.from_vector(np.array([1, 1]) / math.sqrt(2))
    else:
        impl = random_thermal_implementation(int(p.get("d_sys", 2)), int(p.get("d_env", 3)),
                                             beta, rng)
        rho = random_pure(impl.dims[0], rng)
    choice = delta_choice if delta_choice in ("d1", "d2", "d3") else "d1"
    report = check_entropy_production_bound(impl, rho, impl.x_sys, beta,
                                            delta_choice=choice, budget=budget,
                                            seed=rng, scenario_id=scenario_id)
    sigma_beta = report.rhs**2
    return _report_row("thermo", scenario_id, seed, report,
                       sigma_beta_nats=sigma_beta,
                       sigma_beta_bits=sigma_beta / math.log(2.0),
                       two_delta_sq=2.0 * report.delta_irrev**2)


def _run_petz(p: dict, scenario_id: str, seed: int, rng, budget, delta_choice) -> dict:
    d_in = int(p.get("d_in", 2))
    d_out = int(p.get("d_out", d_in))
    rank = int(p.get("kraus_rank", 2))
    forward = random_kraus_channel(d_in, d_out, rank, rng)
    sigma = random_density(d_in, rng)
    rho = random_density(d_in, rng)
    recovery = petz_map(forward, sigma)
    from .channels import apply as ch_apply

    ref_gap = float(np.linalg.norm(
        ch_apply(recovery, ch_apply(forward, sigma.matrix)) - sigma.matrix))
    delta_p = petz_error(forward, sigma, rho.matrix)
    production = generalized_entropy_production(forward, rho.matrix, sigma.matrix)
    log_term = -math.log(max(1e-300, 1.0 - min(delta_p, 1.0 - 1e-15) ** 2))
    chain_slack = min(production - log_term, log_term - delta_p**2)
    slack = chain_slack if ref_gap <= 1e-8 else min(chain_slack, -1.0)
    return _report_row("petz", scenario_id, seed, None,
                       lhs=delta_p**2, rhs=production, slack=slack,
                       delta_p=delta_p, petz_reference_gap=ref_gap,
                       entropy_production=production, log_bound=log_term)


def _run_scramble(p: dict, scenario_id: str, seed: int, rng, budget, delta_choice) -> dict:
    scn = ScrambleScenario(
        bits=int(p.get("bits", 2)),
        block_qubits=int(p.get("block_qubits", 2)),
        bh_qubits=int(p.get("bh_qubits", 5)),
        radiated=int(p.get("radiated", 3)),
        seed=int(rng.integers(0, 2**63 - 1)),
    )
    result = run_scramble_scenario(scn, decoder=p.get("decoder", "per_bit_helstrom_product"))
    extras = {
        "delta_h_achieved": result.delta_h_achieved,
        "delta_h_lower": result.delta_h_lower,
        "bound_rhs": result.bound_rhs,
    }
    extras.update({f"assumption_{k}": v for k, v in result.assumption_checks.items()})
    slack = result.delta_h_achieved - result.delta_h_lower
    lhs = rhs = 0.0
    if p.get("per_bit_check", True):
        per_bit = per_bit_tradeoff_check(scn, delta_choice=p.get("per_bit_delta", "d2"))
        worst = min(per_bit, key=lambda r: r["slack"])
        lhs, rhs = worst["lhs"], worst["rhs"]
        slack = min(slack, worst["slack"])
        extras["per_bit_slacks"] = [r["slack"] for r in per_bit]
    return _report_row("scramble", scenario_id, seed, None,
                       lhs=lhs, rhs=rhs, slack=slack, **extras)


def _way_measurement(p: dict, rng) -> MeasurementChannel:
    basis = p.get("q_basis", "x")
    if basis == "x":
        plus = np.array([1, 1], dtype=np.complex128) / math.sqrt(2)
        minus = np.array([1, -1], dtype=np.complex128) / math.sqrt(2)
        return MeasurementChannel((np.outer(plus, plus.conj()), np.outer(minus, minus.conj())))
    if basis == "z":
        return MeasurementChannel((np.diag([1.0, 0.0]).astype(np.complex128),
                                   np.diag([0.0, 1.0]).astype(np.complex128)))
    if basis == "random":
        dim = int(p.get("dim", 2))
        u = haar_unitary(dim, rng)
        return MeasurementChannel(tuple(np.outer(u[:, k], u[:, k].conj()) for k in range(dim)))
    raise ValueError(f"unknown q_basis {basis!r}")


def _run_way(p: dict, scenario_id: str, seed: int, rng, budget, delta_choice) -> dict:
    q = _way_measurement(p, rng)
    x_in = _operator_from_spec(p.get("x_in", "pauli_z"), rng)
    x_out = _operator_from_spec(p.get("x_out", {"zero": q.pointer_dim}), rng)
    eps_grid = [float(e) for e in p.get("epsilon_grid", [p.get("epsilon", 0.1)])]
    bounds = [apps.measurement_cost_bound(q, q, x_in, x_out, e) for e in sorted(eps_grid)]
    mono = min(
        (bounds[i].value - bounds[i + 1].value for i in range(len(bounds) - 1)),
        default=0.0,
    )
    main = bounds[0]
    return _report_row("way", scenario_id, seed, None,
                       lhs=0.0, rhs=main.value, slack=mono,
                       bound_value=main.value, unbounded=main.unbounded,
                       epsilon=sorted(eps_grid)[0])


def _run_gate(p: dict, scenario_id: str, seed: int, rng, budget, delta_choice) -> dict:
    u = _operator_from_spec(p.get("u", "hadamard"), rng)
    x = _operator_from_spec(p.get("x", "pauli_z"), rng)
    eps_grid = sorted(float(e) for e in p.get("epsilon_grid", [p.get("epsilon", 0.1)]))
    amp = apps.gate_charge_amplitude(u, x)
    bounds = [apps.gate_cost_bound(u, x, e) for e in eps_grid]
    mono = min(
        (bounds[i].value - bounds[i + 1].value for i in range(len(bounds) - 1)),
        default=0.0,
    )
    return _report_row("gate", scenario_id, seed, None,
                       lhs=0.0, rhs=bounds[0].value, slack=mono,
                       amplitude=amp, bound_value=bounds[0].value,
                       unbounded=bounds[0].unbounded, epsilon=eps_grid[0])


def _run_nogo(p: dict, scenario_id: str, seed: int, rng, budget, delta_choice) -> dict:
    u = _operator_from_spec(p.get("u", "hadamard"), rng)
    x = _operator_from_spec(p.get("x", "pauli_z"), rng)
    noise = dephasing_channel(x)
    verdict = apps.nogo_channel_check(u, noise, x, seed=rng)
    expect = p.get("expect")
    slack = 0.0 if (expect is None or verdict.verdict == expect) else -1.0
    return _report_row("nogo", scenario_id, seed, None,
                       slack=slack, verdict=verdict.verdict,
                       matrix_element=verdict.matrix_element)


def _random_covariant_code(n_parts: int, rng) -> tuple[np.ndarray, np.ndarray, list]:
    """Random isometry mapping two logical levels into distinct total-charge
    eigenspaces of n qubits with per-site charge diag(1, 0)."""
    part = np.diag([1.0, 0.0]).astype(np.complex128)
    weights = np.array([bin(i).count("1") for i in range(2**n_parts)], dtype=float)
    levels = sorted(rng.choice(np.arange(n_parts + 1), size=2, replace=False).tolist(),
                    reverse=True)
    cols = []
    for level in levels:
        idx = np.flatnonzero(weights == level)
        amp = rng.normal(size=len(idx)) + 1j * rng.normal(size=len(idx))
        amp /= np.linalg.norm(amp)
        col = np.zeros(2**n_parts, dtype=np.complex128)
        col[idx] = amp
        cols.append(col)
    v = np.stack(cols, axis=1)
    x_l = np.diag([float(levels[0]), float(levels[1])]).astype(np.complex128)
    return v, x_l, [part.copy() for _ in range(n_parts)]


def _run_qec(p: dict, scenario_id: str, seed: int, rng, budget, delta_choice) -> dict:
    if p.get("preset", "toy3") == "toy3":
        v, x_l, parts = apps.toy_three_qubit_code()
    else:
        v, x_l, parts = _random_covariant_code(int(p.get("n_parts", 3)), rng)
    ensemble = apps.extremal_code_ensemble(x_l)
    res = apps.covariant_code_bound(v, x_l, parts, ensemble, budget=budget, seed=rng)
    return _report_row("qec", scenario_id, seed, None,
                       lhs=res.rhs_bound, rhs=res.lhs_error,
                       slack=res.lhs_error - res.rhs_bound,
                       faist_style=res.faist_style,
                       closed_form_gap=res.closed_form_gap,
                       delta_irrev=res.lhs_error)


def _run_kr(p: dict, scenario_id: str, seed: int, rng, budget, delta_choice) -> dict:
    dim = int(p.get("dim", 2))
    n_triples = int(p.get("n_triples", 20))
    worst = (0.0, 0.0, math.inf)
    for _ in range(n_triples):
        rho = random_density(dim, rng)
        o1 = random_hermitian(dim, rng)
        o2 = random_hermitian(dim, rng)
        lhs, rhs, slack = check_uncertainty_relation(rho.matrix, o1, o2)
        if slack < worst[2]:
            worst = (lhs, rhs, slack)
    return _report_row("kr", scenario_id, seed, None,
                       lhs=worst[0], rhs=worst[1], slack=worst[2],
                       n_triples=n_triples)


_RUNNERS = {
    "tradeoff": _run_tradeoff,
    "thermo": _run_thermo,
    "petz": _run_petz,
    "scramble": _run_scramble,
    "way": _run_way,
    "gate": _run_gate,
    "nogo": _run_nogo,
    "qec": _run_qec,
    "kr": _run_kr,
}


# ---------------------------------------------------------------------------
# Config plumbing.
# ---------------------------------------------------------------------------

def validate_config(config: dict) -> list[str]:
    errors = []
    if config.get("schema") != SCHEMA:
        errors.append(f"schema must be {SCHEMA!r}, got {config.get('schema')!r}")
    scenarios = config.get("scenarios")
    if not isinstance(scenarios, list) or not scenarios:
        errors.append("no scenarios")
        return errors
    for i, scn in enumerate(scenarios):
        tag = f"scenario[{i}]"
        if scn.get("kind") not in KINDS:
            errors.append(f"{tag}: unknown kind {scn.get('kind')!r}")
        seeds = scn.get("seeds")
        if not isinstance(seeds, list) or not seeds or not all(
                isinstance(s, int) for s in seeds):
            errors.append(f"{tag}: seeds must be a nonempty list of integers")
        if not isinstance(scn.get("output"), str):
            errors.append(f"{tag}: output path missing")
        budget = scn.get("optimizer_budget", [4, 200])
        if (not isinstance(budget, list) or len(budget) != 2
                or budget[0] < 4 or budget[1] < 200):
            errors.append(f"{tag}: optimizer_budget must be [restarts>=4, iterations>=200]")
        if scn.get("delta_choice", "d1") not in DELTA_CHOICES:
            errors.append(f"{tag}: delta_choice must be one of {DELTA_CHOICES}")
        if not isinstance(scn.get("parameters", {}), dict):
            errors.append(f"{tag}: parameters must be an object")
    return errors


def _scenario_rng(master_seed: int, scenario_id: str, seed: int):
    return generator([
        master_seed & 0xFFFFFFFFFFFFFFFF,
        zlib.crc32(scenario_id.encode()),
        seed & 0xFFFFFFFFFFFFFFFF,
    ])


def run_config(config: dict, base_dir: Path, jobs: int | None = None) -> int:
    errors = validate_config(config)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return 1
    master_seed = int(os.environ.get("SYMCOST_SEED", config.get("master_seed", 0)))
    jobs = jobs or os.cpu_count() or 1

    tasks = []
    for i, scn in enumerate(config["scenarios"]):
        scenario_id = scn.get("scenario_id", f"{scn['kind']}-{i}")
        budget = tuple(scn.get("optimizer_budget", (4, 200)))
        delta_choice = scn.get("delta_choice", "d1")
        params = scn.get("parameters", {})
        output = scn["output"]
        for seed in scn["seeds"]:
            tasks.append((scn["kind"], scenario_id, params, seed, budget, delta_choice, output))

    def work(task):
        kind, scenario_id, params, seed, budget, delta_choice, output = task
        rng = _scenario_rng(master_seed, scenario_id, seed)
        try:
            row = _RUNNERS[kind](params, scenario_id, seed, rng, budget, delta_choice)
        except (TradeoffViolation, ValueError) as exc:
            row = _report_row(kind, scenario_id, seed, None, slack=-1.0,
                              error=f"{type(exc).__name__}: {exc}")
        return output, row

    t0 = time.time()
    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]

    by_output: dict[str, list[dict]] = {}
    for output, row in results:
        by_output.setdefault(output, []).append(row)

    all_pass = True
    for output, rows in by_output.items():
        path = (base_dir / output) if not os.path.isabs(output) else Path(output)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")
        summary = path.with_name(path.name + ".summary.csv")
        with open(summary, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("scenario_id,seed,lhs,rhs,slack,pass\n")
            for row in rows:
                fh.write(f"{row['scenario_id']},{row['seed']},{row['lhs']!r},"
                         f"{row['rhs']!r},{row['slack']!r},{row['pass']}\n")
        meta = path.with_name(path.name + ".meta.json")
        with open(meta, "w", encoding="utf-8") as fh:
            json.dump({"finished_unix": time.time(), "wall_seconds": time.time() - t0,
                       "master_seed": master_seed, "rows": len(rows)}, fh)
        all_pass &= all(row["pass"] for row in rows)
    return 0 if all_pass else 2


def emit_plot_data(report_path: Path, x_field: str, y_field: str) -> str:
    """Two-column CSV, stably sorted by the x field."""
    rows = []
    with open(report_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    for row in rows:
        if x_field not in row or y_field not in row:
            raise KeyError(f"field missing from report: "
                           f"{x_field if x_field not in row else y_field!r}")
    rows.sort(key=lambda r: r[x_field])
    lines = [f"{x_field},{y_field}"]
    lines += [f"{row[x_field]!r},{row[y_field]!r}" for row in rows]
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="symcost",
                                     description="trade-off scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--jobs", type=int, default=None,
                       help="worker threads (default: logical cores)")
    p_plot = sub.add_parser("plot", help="extract plot-ready CSV from a report")
    p_plot.add_argument("report", type=Path)
    p_plot.add_argument("--x", required=True)
    p_plot.add_argument("--y", required=True)
    p_plot.add_argument("--out", type=Path, default=None)
    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config", type=Path)
    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            config = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
        errors = validate_config(config)
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        if not errors:
            print("ok")
        return 1 if errors else 0

    if args.command == "run":
        try:
            config = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
        return run_config(config, base_dir=args.config.parent, jobs=args.jobs)

    if args.command == "plot":
        try:
            csv_text = emit_plot_data(args.report, args.x, args.y)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            print(f"plot error: {exc}", file=sys.stderr)
            return 1
        if args.out is None:
            sys.stdout.write(csv_text)
        else:
            args.out.write_text(csv_text)
        return 0

    return 1


if __name__ == "__main__":
    raise SystemExit(main())
