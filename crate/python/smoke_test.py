"""Smoke test for the mcd_polarimetry extension module.

Build and install first, for example:

    maturin build -m crates/py/Cargo.toml --release -o dist
    pip install dist/mcd_polarimetry-*.whl
"""

import math

import mcd_polarimetry as mp


def noise_floor_formula(gain, eta):
    return 10 * math.log10(1 - 2 * eta * (gain - 1) / (2 * gain - 1))


def main():
    assert mp.noise_floor_db(1.0, 0.9) == 0.0
    assert abs(mp.noise_floor_db(2.29, 0.76) - noise_floor_formula(2.29, 0.76)) < 1e-12
    g = mp.calibrate_gain(-3.45, 0.76)
    assert abs(mp.noise_floor_db(g, 0.76) + 3.45) < 1e-9

    try:
        mp.noise_floor_db(0.5, 0.9)
    except ValueError as e:
        assert "gain" in str(e)
    else:
        raise AssertionError("gain < 1 accepted")

    j1 = mp.bessel_j(1, math.pi / 2)
    assert abs(j1 - 0.5668240889058739) < 1e-12
    eta = 0.013
    ratio = math.tanh(2 * eta)
    assert abs(mp.invert_first_harmonic(2 * j1 * ratio, 1.0) - eta) < 1e-12

    stats = mp.two_mode_stats(2.0, 1e6, 0.8, 0.8)
    assert abs(stats.noise_floor_db - noise_floor_formula(2.0, 0.8)) < 1e-9

    fs, f, amp = 1e6, 50e3, 3e-6
    samples = [1e-4 + amp * math.sin(2 * math.pi * f * i / fs) for i in range(20000)]
    h = mp.lock_in(samples, fs, f, 0.01)
    assert abs(h.in_phase() / amp - 1) < 1e-6, h

    exp = mp.Experiment(
        "seed = 3\n[sweep]\nfields_mt = [0.0, 600.0]\nrepeats = 3\n"
        "[spectrum]\nduration_s = 0.262144\n"
    )
    assert exp.readouts == ["classical", "squeezed"]
    sq = exp.run_sweep("squeezed")
    cl = exp.run_sweep("classical")
    assert len(sq.points) == 2 and sq.points[0].mean_eta_f == 0.0
    assert abs(sq.points[1].mean_eta_f - 0.02) < 1e-4
    assert sq.to_csv() == exp.run_sweep("squeezed", seed=3).to_csv()
    assert cl.points[0].noise_floor_db == 0.0
    assert abs(exp.noise_floor_db() - sq.points[0].noise_floor_db) < 1e-12

    tr = exp.simulate_trace(field_mt=0.0)
    rep = mp.analyze_trace(tr.frequencies, tr.powers_db, snl_level_db=0.0)
    assert abs(rep.squeezing_db - exp.noise_floor_db()) < 0.3, rep.squeezing_db

    try:
        mp.Experiment("[sweep]\nrepeats = 1\n")
    except ValueError as e:
        assert "sweep.repeats" in str(e)
    else:
        raise AssertionError("repeats = 1 accepted")

    print(f"mcd_polarimetry {mp.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
