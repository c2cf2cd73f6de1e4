import json
from pathlib import Path

import numpy as np
import pytest

import edasched as es
from edasched import io as edio
from edasched.cli import main
from edasched.distributions import build_cube_mixture, make_sampler


# -- instance files ------------------------------------------------------------

def test_instance_roundtrip(tmp_path):
    inst = es.Instance(es.StaticJobs([0.1, 2.0], [1.5, 0.25]), [0.3333333333333333, 7.0])
    path = tmp_path / "inst.json"
    edio.write_instance(inst, path)
    back = edio.read_instance(path)
    assert np.array_equal(back.releases, inst.releases)
    assert np.array_equal(back.processings, inst.processings)
    assert np.array_equal(back.delivery, inst.delivery)


def test_instance_parse_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{broken")
    with pytest.raises(edio.ParseError):
        edio.read_instance(p)
    p.write_text(json.dumps({"n": 2, "releases": [0.0], "processings": [1, 1],
                             "delivery": [1, 1]}))
    with pytest.raises(edio.ParseError):
        edio.read_instance(p)
    p.write_text(json.dumps({"n": 1, "releases": [0.0], "processings": [0.0],
                             "delivery": [1.0]}))
    with pytest.raises(edio.ParseError):
        edio.read_instance(p)


def test_statics_reader_accepts_instance_files(tmp_path):
    inst = es.Instance(es.StaticJobs([1.0], [2.0]), [3.0])
    path = tmp_path / "inst.json"
    edio.write_instance(inst, path)
    statics = edio.read_statics(path)
    assert statics.releases.tolist() == [1.0]


# -- flat config ----------------------------------------------------------------

def test_flat_config_roundtrip(tmp_path):
    doc = {"a": 1, "b": 2.5, "c": "uniform", "d": None, "e": True, "f": False}
    path = tmp_path / "cfg.txt"
    edio.write_flat_config(doc, path)
    assert edio.read_flat_config(path) == doc


def test_flat_config_rejects_garbage(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("just some words\n")
    with pytest.raises(edio.ParseError):
        edio.read_flat_config(path)


# -- mixture specs ----------------------------------------------------------------

def test_mixture_spec_rebuilds_identically(tmp_path):
    mix = build_cube_mixture(n=3, f=2, eps=0.5, M=10, const=0.5, tail_mass=0.05,
                             law="gauss", seed=21)
    path = tmp_path / "mix.txt"
    edio.write_mixture_spec(mix, path)
    back = edio.read_mixture_spec(path)
    assert np.array_equal(back.centers, mix.centers)
    assert np.array_equal(back.event_probs, mix.event_probs)
    assert back.grid == mix.grid and back.sigma == mix.sigma


# -- population files ---------------------------------------------------------------

def trained_population(seed=13, T=150):
    mix = build_cube_mixture(n=3, f=2, eps=0.5, M=10, const=0.5, tail_mass=0.1, seed=8)
    statics = es.StaticJobs([0.0, 1.0, 2.0], [2.0, 1.0, 2.0])
    return es.run_eda(make_sampler(mix), T, 0.5, es.make_scheduler(statics),
                      seed, statics=statics)


def test_population_roundtrip_is_lossless(tmp_path):
    pop = trained_population()
    p1 = tmp_path / "pop.json"
    p2 = tmp_path / "pop2.json"
    edio.write_population(pop, p1)
    back = edio.read_population(p1)
    edio.write_population(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert back.counter.total == pop.counter.total
    for fa, fb in zip(pop.finals, back.finals):
        assert np.array_equal(fa.members, fb.members)
        assert np.array_equal(fa.mean, fb.mean)
        assert fa.event_prob == fb.event_prob
    # the reloaded population serves queries identically
    q = pop.finals[0].mean
    hit = es.query_robust_schedule(back, q, 0.5)
    assert hit is not None and np.array_equal(hit[0].mean, q)


def test_population_writer_requires_finalized(tmp_path):
    from edasched.eda import Population
    pop = Population(counter=es.init_counter(np.array([1.0])), regulars=[], eps=0.5)
    with pytest.raises(es.ValidationError):
        edio.write_population(pop, tmp_path / "x.json")


# -- CLI ---------------------------------------------------------------------------

def run_cli(*args):
    return main([str(a) for a in args])


def test_generate_is_deterministic(tmp_path):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    for d in (d1, d2):
        assert run_cli("generate", "--n", 4, "--events", 3, "--eps", 0.5,
                       "--seed", 7, "--emit-instances", 2, "--out-dir", d) == 0
    for name in ("mixture.txt", "statics.json", "instance_000.json", "instance_001.json"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


def test_generate_unwritable_output_is_io_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    rc = run_cli("generate", "--n", 2, "--events", 1, "--eps", 0.5,
                 "--seed", 1, "--out-dir", blocker)
    assert rc == 2
    assert str(blocker) in capsys.readouterr().err


def test_generate_rejects_impossible_geometry(tmp_path, capsys):
    rc = run_cli("generate", "--n", 2, "--events", 1, "--eps", 5.0, "--M", 1.0,
                 "--seed", 1, "--out-dir", tmp_path)
    assert rc == 1
    assert "eps" in capsys.readouterr().err


def test_train_query_roundtrip(tmp_path, capsys):
    assert run_cli("generate", "--n", 4, "--events", 2, "--eps", 0.5, "--seed", 3,
                   "--emit-instances", 1, "--out-dir", tmp_path) == 0
    assert run_cli("train", "--mixture", tmp_path / "mixture.txt",
                   "--statics", tmp_path / "statics.json",
                   "--out", tmp_path / "pop.json", "--seed", 5, "--T", 300) == 0
    out = capsys.readouterr().out
    assert "final individuals" in out
    rc = run_cli("query", "--population", tmp_path / "pop.json",
                 "--instance", tmp_path / "instance_000.json")
    assert rc == 0
    out = capsys.readouterr().out
    assert "matched individual" in out and "permutation" in out


def test_train_single_cube_reports_full_probability(tmp_path, capsys):
    assert run_cli("generate", "--n", 3, "--events", 1, "--eps", 0.5,
                   "--tail-mass", 0.0, "--seed", 8, "--out-dir", tmp_path) == 0
    assert run_cli("train", "--mixture", tmp_path / "mixture.txt",
                   "--out", tmp_path / "pop.json", "--seed", 2, "--T", 100) == 0
    out = capsys.readouterr().out
    assert "final individuals: 1" in out
    assert "event_prob=1.000000" in out


def test_train_missing_spec_is_io_error(tmp_path, capsys):
    rc = run_cli("train", "--mixture", tmp_path / "nope.txt",
                 "--out", tmp_path / "pop.json", "--seed", 1)
    assert rc == 2
    assert "No such file" in capsys.readouterr().err


def test_train_warns_when_starved(tmp_path, capsys):
    assert run_cli("generate", "--n", 3, "--events", 3, "--eps", 0.5, "--seed", 4,
                   "--out-dir", tmp_path) == 0
    assert run_cli("train", "--mixture", tmp_path / "mixture.txt",
                   "--out", tmp_path / "pop.json", "--seed", 5, "--T", 1) == 0
    assert "likely uncovered" in capsys.readouterr().err


def test_query_no_match_exit_code(tmp_path):
    assert run_cli("generate", "--n", 3, "--events", 2, "--eps", 0.5, "--seed", 6,
                   "--emit-instances", 1, "--out-dir", tmp_path) == 0
    assert run_cli("train", "--mixture", tmp_path / "mixture.txt",
                   "--statics", tmp_path / "statics.json",
                   "--out", tmp_path / "pop.json", "--seed", 5, "--T", 200) == 0
    inst = edio.read_instance(tmp_path / "instance_000.json")
    edio.write_instance(es.Instance(inst.statics, np.full(inst.n, 9.875)),
                        tmp_path / "far.json")
    rc = run_cli("query", "--population", tmp_path / "pop.json",
                 "--instance", tmp_path / "far.json")
    assert rc == 3


def test_query_malformed_instance(tmp_path):
    assert run_cli("generate", "--n", 3, "--events", 2, "--eps", 0.5, "--seed", 6,
                   "--out-dir", tmp_path) == 0
    assert run_cli("train", "--mixture", tmp_path / "mixture.txt",
                   "--out", tmp_path / "pop.json", "--seed", 5, "--T", 50) == 0
    bad = tmp_path / "bad.json"
    bad.write_text("{\"n\": 2")
    assert run_cli("query", "--population", tmp_path / "pop.json",
                   "--instance", bad) == 1


def test_verify_writes_reports_and_consistent_bound_column(tmp_path):
    cfg = tmp_path / "campaign.txt"
    edio.write_flat_config(
        {"n": 3, "events": 2, "eps": 0.5, "M": 8.0, "const": 0.6,
         "replications": 3, "master_seed": 9, "m_fresh": 100, "sample_cap": 200},
        cfg,
    )
    assert run_cli("verify", "--config", cfg, "--out-dir", tmp_path) == 0
    rows = edio.read_campaign_csv(tmp_path / "report.csv")
    assert len(rows) == 3
    tc = es.TheoryConstants(n=3, c=1.0, d=1.0, l=1.0, alpha=0.5, delta=0.125,
                            eps=0.5, const=0.6, const1=1.0, const2=8.0 / 3.0)
    want = es.training_failure_bound(tc)
    for row in rows:
        assert row["theory_bound"] == want
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert "note" in summary and "aggregate" in summary
    assert "created" in summary


def test_verify_flag_overrides_config(tmp_path):
    cfg = tmp_path / "campaign.txt"
    edio.write_flat_config(
        {"n": 3, "events": 2, "eps": 0.5, "M": 8.0, "const": 0.6,
         "replications": 3, "master_seed": 9, "m_fresh": 50, "sample_cap": 150},
        cfg,
    )
    assert run_cli("verify", "--config", cfg, "--replications", 1,
                   "--out-dir", tmp_path) == 0
    assert len(edio.read_campaign_csv(tmp_path / "report.csv")) == 1


def test_verify_rejects_unknown_config_keys(tmp_path, capsys):
    cfg = tmp_path / "campaign.txt"
    edio.write_flat_config({"bogus": 1}, cfg)
    assert run_cli("verify", "--config", cfg, "--out-dir", tmp_path) == 1
    assert "bogus" in capsys.readouterr().err
