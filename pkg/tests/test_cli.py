import json

import numpy as np
import pytest

from txbeam import fileformat as ff
from txbeam.cli import main
from txbeam.config import ENV_MAP_STORE


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestMaps:
    def test_idempotent(self, capsys, tiny_config):
        code, out, _ = run(capsys, "maps", "--config", tiny_config)
        assert code == 0 and out.count("computed") == 2
        store = tiny_config.parent / "maps"
        stamps = {p.name: p.read_bytes() for p in store.iterdir()}
        assert sorted(stamps) == ["narrowband_f3MHz.pust", "wideband.pust"]
        code, out, _ = run(capsys, "maps", "--config", tiny_config)
        assert code == 0 and out.count("reused") == 2
        assert {p.name: p.read_bytes() for p in store.iterdir()} == stamps
        code, out, _ = run(capsys, "maps", "--config", tiny_config, "--force", "--mode", "narrowband")
        assert code == 0 and out.count("computed") == 1
        assert (store / "narrowband_f3MHz.pust").read_bytes() == stamps["narrowband_f3MHz.pust"]

    def test_header_mismatch(self, capsys, tiny_config):
        assert run(capsys, "maps", "--config", tiny_config, "--mode", "wideband")[0] == 0
        other = tiny_config.parent / "other.toml"
        other.write_text(tiny_config.read_text().replace("dz = 0.5e-3", "dz = 1e-3"))
        code, _, err = run(capsys, "maps", "--config", other, "--mode", "wideband")
        assert code == 4 and "header mismatch" in err and "nz" in err
        assert run(capsys, "maps", "--config", other, "--mode", "wideband", "--force")[0] == 0

    def test_nyquist(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        (tmp_path / "c.toml").write_text("[time]\ndt = 1e-7\n")
        code, _, err = run(capsys, "maps", "--config", tmp_path / "c.toml")
        assert code == 2 and "Nyquist" in err and "time.dt" in err

    def test_env_store(self, capsys, tiny_config, monkeypatch, tmp_path):
        monkeypatch.setenv(ENV_MAP_STORE, str(tmp_path / "envstore"))
        assert run(capsys, "maps", "--config", tiny_config, "--mode", "wideband")[0] == 0
        assert (tmp_path / "envstore" / "wideband.pust").exists()
        assert not (tmp_path / "maps").exists()
        flag = tmp_path / "flagstore"
        assert run(capsys, "maps", "--config", tiny_config, "--mode", "wideband", "--map-store", flag)[0] == 0
        assert (flag / "wideband.pust").exists()

    def test_missing_config(self, capsys, tmp_path):
        assert run(capsys, "maps", "--config", tmp_path / "nope.toml")[0] == 3


class TestBP:
    def test_modes_and_artifacts(self, capsys, tiny_config):
        run(capsys, "maps", "--config", tiny_config)
        for mode in ("narrowband", "wideband"):
            code, out, _ = run(capsys, "bp", "--config", tiny_config, "--mode", mode, "--image", "--text")
            assert code == 0, out
            stem = tiny_config.parent / "out" / f"{mode}_f3MHz_M8_F10mm"
            h, a, _, meta = ff.read(stem.with_suffix(".pust"))
            assert a.shape == (24, 21) and h.kind == ff.KIND_BEAM
            assert meta["config"]["probe"]["elements"] == 16 and meta["focus"] == 0.01
            assert stem.with_suffix(".pgm").read_bytes().startswith(b"P5\n24 21\n")
            np.testing.assert_array_equal(ff.read_text_matrix(stem.with_suffix(".txt")), a)
            z = h.z_min + np.unravel_index(np.argmax(a), a.shape)[1] * h.dz
            assert 8e-3 <= z <= 11e-3

    def test_delay_file(self, capsys, tiny_config):
        run(capsys, "maps", "--config", tiny_config, "--mode", "narrowband")
        d = tiny_config.parent / "d.txt"
        d.write_text("0\n1e-8\n2e-8\n3e-8\n")
        code, out, _ = run(capsys, "--json", "bp", "--config", tiny_config, "--delays", d)
        assert code == 0
        res = json.loads(out)
        assert res["delay_source"] == "file" and res["focus"] is None
        _, _, _, meta = ff.read(res["files"]["bp"])
        assert meta["delays"][4:] == [0, 1e-8, 2e-8, 3e-8]
        assert meta["config"]["transmit"]["delays_file"] == str(d)

    def test_asymmetric_narrowband(self, capsys, tiny_config):
        run(capsys, "maps", "--config", tiny_config, "--mode", "narrowband")
        d = tiny_config.parent / "d.txt"
        d.write_text(" ".join(str(i * 1e-8) for i in range(8)))
        code, _, err = run(capsys, "bp", "--config", tiny_config, "--delays", d)
        assert code == 2 and "symmetric" in err

    def test_missing_map(self, capsys, tiny_config):
        code, _, err = run(capsys, "bp", "--config", tiny_config, "--mode", "wideband")
        assert code == 3 and "maps command" in err
        run(capsys, "maps", "--config", tiny_config, "--mode", "narrowband")
        assert run(capsys, "bp", "--config", tiny_config, "--f0", 4e6)[0] == 3

    def test_smaller_aperture_same_maps(self, capsys, tiny_config):
        run(capsys, "maps", "--config", tiny_config, "--mode", "wideband")
        assert run(capsys, "bp", "--config", tiny_config, "--mode", "wideband", "--elements", 4)[0] == 0
        assert run(capsys, "bp", "--config", tiny_config, "--mode", "wideband", "--elements", 10)[0] == 4


class TestCompare:
    def _bp(self, capsys, cfg):
        run(capsys, "maps", "--config", cfg, "--mode", "narrowband")
        run(capsys, "bp", "--config", cfg, "--text")
        return cfg.parent / "out" / "narrowband_f3MHz_M8_F10mm"

    def test_self_and_scaled(self, capsys, tiny_config):
        stem = self._bp(capsys, tiny_config)
        code, out, _ = run(capsys, "compare", stem.with_suffix(".pust"), "--reference", stem.with_suffix(".txt"),
                           "--threshold", 1e-12)
        assert code == 0 and "result: pass" in out
        scaled = tiny_config.parent / "scaled.txt"
        ff.write_text_matrix(scaled, 2 * ff.read_text_matrix(stem.with_suffix(".txt")))
        code, out, _ = run(capsys, "--json", "compare", stem.with_suffix(".pust"), "--reference", scaled)
        res = json.loads(out)
        assert code == 0 and res["distance"] <= 1e-12 and res["counts"][0] == 24 * 21

    def test_threshold_fail(self, capsys, tiny_config):
        stem = self._bp(capsys, tiny_config)
        other = tiny_config.parent / "other.txt"
        ff.write_text_matrix(other, np.ones((24, 21)))
        code, out, _ = run(capsys, "compare", stem.with_suffix(".pust"), "--reference", other, "--threshold", 1e-6)
        assert code == 1 and "result: fail" in out

    def test_errors(self, capsys, tiny_config):
        stem = self._bp(capsys, tiny_config)
        small = tiny_config.parent / "small.txt"
        ff.write_text_matrix(small, np.ones((2, 2)))
        assert run(capsys, "compare", stem.with_suffix(".pust"), "--reference", small)[0] == 2
        assert run(capsys, "compare", stem.with_suffix(".pust"), "--reference", small.with_name("none"))[0] == 3


class TestSweep:
    def test_full_product(self, capsys, tiny_config):
        code, out, _ = run(capsys, "sweep", "--config", tiny_config, "--mode", "narrowband")
        assert code == 0
        bps = sorted((tiny_config.parent / "out").glob("narrowband_*.pust"))
        assert len(bps) == 12
        table = (tiny_config.parent / "out" / "sweep_narrowband_summary.txt").read_text()
        assert "Average" in table and "M=4" in table and "f0 4.5 MHz" in table
        assert len(table.splitlines()) == 1 + 2 + 3 + 1 + 1

    def test_reference_dir(self, capsys, tiny_config):
        run(capsys, "sweep", "--config", tiny_config, "--mode", "narrowband")
        ref = tiny_config.parent / "ref"
        ref.mkdir()
        src = tiny_config.parent / "out" / "narrowband_f3MHz_M8_F10mm.pust"
        ff.write_text_matrix(ref / "narrowband_f3MHz_M8_F10mm.txt", 3 * ff.read(src)[1])
        code, out, _ = run(capsys, "--json", "sweep", "--config", tiny_config, "--mode", "narrowband",
                           "--reference", ref)
        res = json.loads(out)
        assert code == 0 and "distance" in res["tables"]
        hit = [c for c in res["cases"] if c.get("reference")]
        assert len(hit) == 1 and hit[0]["distance"] <= 1e-12

    def test_empty_list(self, capsys, tiny_config):
        tiny_config.write_text(tiny_config.read_text().replace("focus = [8e-3, 10e-3, 12e-3]", "focus = []"))
        code, _, err = run(capsys, "sweep", "--config", tiny_config)
        assert code == 2 and "sweep.focus" in err

    def test_failed_cases_recorded(self, capsys, tiny_config):
        # 18 active elements exceed the 16-element probe, so those cases fail one by one
        tiny_config.write_text(tiny_config.read_text().replace("elements = [4, 8]", "elements = [4, 18]"))
        code, out, _ = run(capsys, "sweep", "--config", tiny_config, "--mode", "wideband")
        assert code == 5 and out.count("failed ") == 6
        assert len(list((tiny_config.parent / "out").glob("wideband_*.pust"))) == 6


class TestPCA:
    def test_single_sample_and_seed(self, capsys, tiny_config):
        run(capsys, "maps", "--config", tiny_config, "--mode", "narrowband")
        code, out, _ = run(capsys, "pca", "--config", tiny_config, "--count", 1, "--seed", 5)
        assert code == 0 and "eigenvalues" in out
        out_dir = tiny_config.parent / "out"
        stem = out_dir / "pca_f3MHz_P4_n1"
        first = {p.name: p.read_bytes() for p in out_dir.glob("pca_*")}
        assert len(first) == 5 and np.loadtxt(f"{stem}_phases.txt", ndmin=2)[0, 0] == 0.0
        run(capsys, "pca", "--config", tiny_config, "--count", 1, "--seed", 5)
        assert {p.name: p.read_bytes() for p in out_dir.glob("pca_*")} == first
        run(capsys, "pca", "--config", tiny_config, "--count", 1, "--seed", 6)
        assert (stem.parent / f"{stem.name}_phases.txt").read_bytes() != first[f"{stem.name}_phases.txt"]

    def test_ensemble(self, capsys, tiny_config):
        run(capsys, "maps", "--config", tiny_config, "--mode", "narrowband")
        code, out, _ = run(capsys, "--json", "pca", "--config", tiny_config, "--count", 300, "--no-ensemble")
        res = json.loads(out)["results"][0]
        assert code == 0 and all(v > 0 for v in res["eigenvalues"]) and "ensemble" not in res["files"]
        _, basis, _, meta = ff.read(res["files"]["basis"])
        assert basis.shape == (4, 24 * 21) and meta["config"]["seed"] == 3
        np.testing.assert_allclose(basis[1:] @ basis[1:].T, np.eye(3), atol=1e-8)
        assert np.loadtxt(res["files"]["table"]).shape == (300, 3)

    def test_rank_error(self, capsys, tiny_config):
        run(capsys, "maps", "--config", tiny_config, "--mode", "narrowband")
        assert run(capsys, "pca", "--config", tiny_config, "--count", 5, "--k", 600)[0] == 5


@pytest.mark.slow
def test_full_probe_35_pair_map(capsys, tmp_path, monkeypatch):
    """35 delayed pairs over a [280, 201] grid on the full probe at 4.5 MHz."""
    monkeypatch.delenv(ENV_MAP_STORE, raising=False)
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'[grid]\nhalf_width_elements = 35\n[pulse]\nf0 = 4.5e6\n'
                   f'[transmit]\nelements = 70\nfocus = 25e-3\n'
                   f'[paths]\nmap_store = "{tmp_path / "m"}"\nout = "{tmp_path / "o"}"\n')
    code, out, _ = run(capsys, "maps", "--config", cfg, "--mode", "narrowband", "--f0", 4.5e6)
    assert code == 0
    h, G, _, _ = ff.read(tmp_path / "m" / "narrowband_f4.5MHz.pust")
    assert G.shape == (280, 201, 35) and h.f0 == 4.5e6
    code, out, _ = run(capsys, "--json", "bp", "--config", cfg)
    res = json.loads(out)
    assert code == 0 and res["shape"] == [280, 201] and 20e-3 <= res["peak_z"] <= 30e-3
