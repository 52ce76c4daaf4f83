import re
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sysacc.archspec import XCZU7EV, ArchConfig, Calibration, DeviceProfile, preset
from sysacc.bench import (
    SUITE,
    count_gops,
    efficiency,
    estimate_from_sizes,
    estimate_resources,
    ordering_failures,
    run_experiment,
    run_suite,
    to_csv,
    to_svg,
)
from sysacc.bench.suite import REFERENCE_FPS, ExperimentResult
from sysacc.nnir import EMPTY_GRAPH, GraphBuilder, TensorShape, random_blob


def within(x, target, tol=0.15):
    return abs(x - target) <= tol * target


def test_uram_resources_near_reported_usage():
    r = estimate_resources(preset("uram"), XCZU7EV)
    assert r.dsp_used == 32 * 32 + 30 == 1054
    assert r.uram_used == -(-48 * 65536 // 36864) == 86
    assert r.bram36_used == -(-20 * 65536 // 4608) == 285
    assert r.lut_estimate == 160 * 1024 + 20000
    assert within(r.dsp_used, 1054) and within(r.bram36_used, 293) and within(r.uram_used, 96)
    assert r.uram_used <= XCZU7EV.uram_blocks and r.fits


def test_baseline_maps_everything_to_bram():
    r = estimate_resources(preset("baseline"), XCZU7EV)
    assert r.uram_used == 0
    assert r.bram36_used == -(-16 * 65536 // 4608) + -(-4 * 65536 // 4608) == 285


def test_degenerate_sizes():
    r = estimate_from_sizes(1, 1, 2, 0, 0, use_uram=True)
    assert r.dsp_used == 1 + XCZU7EV.calibration.dsp_overhead
    assert (r.bram36_used, r.uram_used) == (0, 0)


def test_uram_cap_spills_to_bram():
    r = estimate_resources(preset("uram").replace(local_mem_kv=64), XCZU7EV)
    assert r.uram_used == 96 and r.local_uram_needed == 114
    spill = 64 * 65536 - 96 * 36864
    assert r.local_spill_bram == -(-spill // 4608)
    assert not r.fits


def test_port_factor_doubles_bram():
    dev = DeviceProfile("x2", 312, 96, 1728, 230400, calibration=Calibration(bram_port_factor=2))
    assert estimate_resources(preset("uram"), dev).bram36_used == 2 * 285


sizes = st.fixed_dictionaries({
    "array_rows": st.sampled_from([4, 8, 16, 32, 64]),
    "local_mem_kv": st.integers(1, 128),
    "accum_kv": st.integers(1, 64),
    "use_uram": st.booleans(),
})


@given(sizes, st.sampled_from(["array_rows", "local_mem_kv", "accum_kv"]), st.integers(1, 64))
def test_resources_monotone(base, field, extra):
    base = {**base, "array_cols": base["array_rows"]}
    a = ArchConfig(**base)
    grown = {**base, field: base[field] + extra}
    if field == "array_rows":
        grown["array_cols"] = grown["array_rows"]
    b = ArchConfig(**grown)
    ra, rb = estimate_resources(a), estimate_resources(b)
    for f in ("dsp_used", "bram36_used", "uram_used", "lut_estimate"):
        assert getattr(ra, f) <= getattr(rb, f)
    assert ra.dsp_used >= a.array_rows * a.array_cols


def test_count_gops():
    gb = GraphBuilder(TensorShape(1, 1, 1, 64))
    gb.dense(0, 10)
    assert count_gops(gb.build()) == Fraction(2 * 640, 10**9)
    assert count_gops(EMPTY_GRAPH) == 0


def test_resnet_gops_vs_reference_ratio(resnet):
    g, _ = resnet
    gop = count_gops(g)
    assert gop == Fraction(2 * 40_813_184, 10**9)
    implied = 21.12 / 293.58
    # the published throughput implies about 12% fewer operations per frame
    assert 0.85 < implied / float(gop) < 0.90


def test_efficiency():
    assert round(float(efficiency(21.12, 5.21)), 2) == 4.05
    assert efficiency(Fraction(10), 4) == Fraction(5, 2)
    with pytest.raises(ValueError):
        efficiency(21.12, None)
    with pytest.raises(ValueError):
        efficiency(21.12, 0)


@pytest.fixture(scope="module")
def suite_rows(resnet):
    g, blob = resnet
    return run_suite(g, blob)


def test_suite_rows(suite_rows):
    assert [r.preset for r in suite_rows] == list(SUITE)
    assert [r.strategy for r in suite_rows][-1] == "local_resident"
    assert all(r.ok for r in suite_rows)
    assert ordering_failures(suite_rows) == []
    fps = [r.fps for r in suite_rows]
    assert fps == sorted(fps) and len(set(fps)) == 4


def test_suite_mechanisms(suite_rows):
    base, dual, uram, strat = suite_rows
    assert dual.compute_cycles == base.compute_cycles
    assert dual.transfer_cycles < base.transfer_cycles
    assert strat.activation_bytes < uram.activation_bytes
    for r in suite_rows:
        assert r.throughput == r.fps * r.gops_per_frame
        assert r.fps * r.total_cycles == 100_000_000


def test_csv_and_svg(suite_rows, resnet):
    g, blob = resnet
    text = to_csv(suite_rows, watts=5.21)
    assert text == to_csv(run_suite(g, blob), watts=5.21)
    lines = text.splitlines()
    assert len(lines) == 5 and lines[0].startswith("preset,strategy,fps,reference_fps")
    assert ",133.54," in lines[1]
    assert to_csv(suite_rows).splitlines()[1].split(",")[14] == ""
    svg = to_svg(suite_rows)
    assert svg.startswith("<svg") and svg.count("<rect") == 8
    assert set(re.findall(r'(?:fill|stroke)="([^"]+)"', svg)) <= {"black", "none"}


def test_infeasible_row_reported():
    gb = GraphBuilder(TensorShape(1, 3, 3, 8192))
    gb.conv(0, 32, k=3)
    g = gb.build()
    blob = random_blob(g, 0)
    rows = run_suite(g, blob)
    assert len(rows) == 4 and not any(r.ok for r in rows)
    assert "local memory" in rows[0].error
    assert ordering_failures(rows)


def test_ordering_failures_detects_regression():
    mk = lambda name, fps, cc=10, tc=10: ExperimentResult(name, "x", Fraction(fps), compute_cycles=cc,  # noqa: E731
                                                         transfer_cycles=tc)
    rows = [mk("baseline", 10), mk("dualclock", 9, tc=5), mk("uram", 11), mk("uram_strategy", 12)]
    assert any("not increasing" in f for f in ordering_failures(rows))
    rows = [mk("baseline", 10), mk("dualclock", 11, cc=9, tc=5)]
    assert ordering_failures(rows) == ["dualclock changed compute_cycles"]
    assert set(REFERENCE_FPS) == set(SUITE)


def test_run_experiment_strategy_override(resnet):
    g, blob = resnet
    r = run_experiment("uram", g, blob, strategy="local_resident")
    assert r.strategy == "local_resident" and r.ok
