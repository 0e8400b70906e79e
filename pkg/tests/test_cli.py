"""Command line interface and pipeline orchestration."""
import json

import pytest

from ideoscale import io, pipeline
from ideoscale.cli import main
from ideoscale.errors import DataError, NumericalError, PipelineStageError
from ideoscale.types import FollowMatrix

SMALL_SYNTH = {"n_journalists": 12, "n_active_users": 60, "n_elites": 40,
               "n_anchored": 16, "n_outlets": 3, "seed": 5}

RUN_CONFIG = {"synth": SMALL_SYNTH,
              "scoring": {"lexicon_size_per_side": 12, "top_n_per_side": 60}}


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


@pytest.fixture
def synth_dir(tmp_path):
    cfg = write_json(tmp_path / "synth.json", SMALL_SYNTH)
    out = tmp_path / "data"
    assert main(["synth", "network", "--config", cfg, "--out", str(out)]) == 0
    return out


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_exit_code_usage_errors():
    assert main([]) == 1
    assert main(["net"]) == 1
    assert main(["no-such-command"]) == 1
    assert main(["net", "embed"]) == 1  # missing required options


def test_exit_code_help_is_success(capsys):
    assert main(["--help"]) == 0
    assert "ideoscale" in capsys.readouterr().out


def test_exit_code_data_error(tmp_path, capsys):
    rc = main(["net", "embed", "--matrix", str(tmp_path / "missing.tsv"),
               "--out", str(tmp_path / "e.tsv")])
    assert rc == 2
    assert "not found" in capsys.readouterr().err


def test_exit_code_numerical_error(tmp_path, capsys):
    matrix = FollowMatrix(rows=("r1", "r2"), cols=("c1", "c2"),
                          cells=frozenset({(0, 0), (1, 1)}))
    path = tmp_path / "m.tsv"
    io.write_matrix(path, matrix)
    rc = main(["net", "embed", "--matrix", str(path), "--k", "5",
               "--out", str(tmp_path / "e.tsv")])
    assert rc == 3
    assert "exceeds" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# stage-by-stage round trip on synthetic files
# ---------------------------------------------------------------------------

def test_net_chain(synth_dir, tmp_path, capsys):
    d = str(synth_dir)
    matrix = str(tmp_path / "matrix.tsv")
    assert main(["net", "build-matrix", "--edges", f"{d}/edges.tsv",
                 "--registrations", f"{d}/registrations.tsv",
                 "--journalists", f"{d}/journalists.tsv",
                 "--anchors", f"{d}/anchors.csv", "--out", matrix]) == 0
    assert "matrix:" in capsys.readouterr().out

    embeddings = str(tmp_path / "embeddings.tsv")
    assert main(["net", "embed", "--matrix", matrix, "--k", "3",
                 "--out", embeddings]) == 0
    space = io.load_embeddings(embeddings)
    assert space.k == 3

    model = str(tmp_path / "model.json")
    assert main(["net", "fit", "--embeddings", embeddings,
                 "--anchors", f"{d}/anchors.csv", "--out", model]) == 0

    scores = str(tmp_path / "network_scores.tsv")
    assert main(["net", "score", "--embeddings", embeddings, "--model", model,
                 "--journalists", f"{d}/journalists.tsv",
                 "--registrations", f"{d}/registrations.tsv",
                 "--out", scores]) == 0
    estimates = io.load_estimates(scores)
    assert estimates and all(e.source == "network" for e in estimates)
    assert all(e.group for e in estimates)

    # network recovery should correlate with the planted ideology
    truth = io.load_values(f"{d}/truth.tsv")
    from scipy.stats import spearmanr
    rho = spearmanr([truth[e.account] for e in estimates],
                    [e.score for e in estimates]).statistic
    assert rho > 0.5


def test_text_chain(synth_dir, tmp_path):
    d = str(synth_dir)
    cfg = write_json(tmp_path / "synth.json", SMALL_SYNTH)
    statements = str(tmp_path / "statements.jsonl")
    assert main(["synth", "corpus", "--config", cfg, "--truth", f"{d}/truth.tsv",
                 "--groups", f"{d}/registrations.tsv", "--out", statements]) == 0

    terms = str(tmp_path / "terms.tsv")
    assert main(["text", "extract-terms", "--corpus", statements,
                 "--out", terms]) == 0
    assert len(io.load_terms(terms)) > 100

    term_scores = str(tmp_path / "term_scores.tsv")
    assert main(["text", "score-terms", "--corpus", statements,
                 "--terms", terms, "--out", term_scores]) == 0
    table = io.load_term_scores(term_scores)
    assert table.setup.lam == 1.0

    lexicon_path = str(tmp_path / "lexicon.tsv")
    assert main(["text", "build-lexicon", "--scores", term_scores,
                 "--per-side", "12", "--top-n", "60",
                 "--out", lexicon_path]) == 0
    lexicon = io.load_lexicon(lexicon_path)
    assert len(lexicon.left_terms) == len(lexicon.right_terms) == 12
    # planted vocabularies must land on their own sides
    assert all(t.split()[0].startswith("lean") for t in lexicon.left_terms)
    assert all(t.split()[0].startswith("rite") for t in lexicon.right_terms)

    articles = str(tmp_path / "articles.jsonl")
    assert main(["synth", "corpus", "--config", cfg, "--truth", f"{d}/truth.tsv",
                 "--groups", f"{d}/journalists.tsv", "--out", articles]) == 0
    author_scores = str(tmp_path / "author_scores.tsv")
    assert main(["text", "score-authors", "--corpus", articles,
                 "--lexicon", lexicon_path, "--out", author_scores]) == 0
    scores, groups = io.load_author_scores(author_scores)
    assert scores and groups
    assert all(g.startswith("out") for g in groups.values())


def test_analyze_chain(synth_dir, tmp_path):
    d = str(synth_dir)
    cfg = write_json(tmp_path / "cfg.json", RUN_CONFIG)
    run_dir = tmp_path / "report"
    assert main(["run", "--config", cfg, "--synth", "--out", str(run_dir)]) == 0

    means = str(tmp_path / "means.csv")
    assert main(["analyze", "means", "--estimates",
                 str(run_dir / "network_scores.tsv"), "--out", means]) == 0
    loaded = io.load_keyed_csv(means)
    assert set(loaded) >= {"D", "R"}

    corr = str(tmp_path / "corr.csv")
    assert main(["analyze", "correlate", "--x", str(run_dir / "network_means.csv"),
                 "--y", str(run_dir / "text_means.csv"), "--method", "both",
                 "--out", corr]) == 0
    lines = [l for l in open(corr) if not l.startswith("#")]
    assert lines[0].strip() == "name,method,coefficient,n"
    assert len(lines) == 3

    reg = str(tmp_path / "regression.csv")
    figs = tmp_path / "figs"
    assert main(["analyze", "regress",
                 "--outcome", str(run_dir / "author_scores.tsv"),
                 "--predictor", str(run_dir / "network_scores.tsv"),
                 "--reference", "out00", "--figures", str(figs),
                 "--out", reg]) == 0
    body = open(reg).read()
    assert "network_score" in body and "# r_squared=" in body
    assert (figs / "coefficients.svg").exists()


# ---------------------------------------------------------------------------
# full pipeline runs
# ---------------------------------------------------------------------------

EXPECTED_RUN_FILES = [
    "config.json", "edges.tsv", "registrations.tsv", "journalists.tsv",
    "anchors.csv", "truth.tsv", "statements.jsonl", "articles.jsonl",
    "matrix.tsv", "embeddings.tsv", "model.json", "network_scores.tsv",
    "terms.tsv", "term_scores.tsv", "lexicon.tsv", "author_scores.tsv",
    "network_means.csv", "text_means.csv", "correlations.csv",
    "regression.csv", "scatter.svg", "coefficients.svg", "separation.svg",
]


def test_run_synth_writes_complete_report(tmp_path):
    cfg = write_json(tmp_path / "cfg.json", RUN_CONFIG)
    out = tmp_path / "report"
    assert main(["run", "--config", cfg, "--synth", "--out", str(out)]) == 0
    for name in EXPECTED_RUN_FILES:
        assert (out / name).exists(), name
    assert not (out / pipeline.SENTINEL).exists()
    assert not (out / pipeline.LOCK).exists()
    # every delimited output carries the same config digest header
    digests = set()
    for name in EXPECTED_RUN_FILES:
        if name.endswith(".svg"):
            continue
        head = (out / name).read_text().splitlines()[0]
        assert head.startswith("# ideoscale ")
        digests.add(head.split("config=")[1])
    assert len(digests) == 1


def test_run_same_seed_is_byte_identical(tmp_path):
    cfg = write_json(tmp_path / "cfg.json", RUN_CONFIG)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--synth", "--out", str(out_a)]) == 0
    assert main(["run", "--config", cfg, "--synth", "--out", str(out_b)]) == 0
    for name in EXPECTED_RUN_FILES:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_run_seed_flag_changes_outputs(tmp_path):
    cfg = write_json(tmp_path / "cfg.json", RUN_CONFIG)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--synth", "--seed", "5",
                 "--out", str(out_a)]) == 0
    assert main(["run", "--config", cfg, "--synth", "--seed", "6",
                 "--out", str(out_b)]) == 0
    assert ((out_a / "edges.tsv").read_bytes()
            != (out_b / "edges.tsv").read_bytes())
    # the seed participates in the config digest
    head = lambda p: (p / "config.json").read_text().splitlines()[0]
    assert head(out_a) != head(out_b)


def test_run_locked_directory_refused(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", RUN_CONFIG)
    out = tmp_path / "report"
    out.mkdir()
    (out / pipeline.LOCK).touch()
    rc = main(["run", "--config", cfg, "--synth", "--out", str(out)])
    assert rc == 2
    assert "locked" in capsys.readouterr().err


def test_run_missing_input_file_names_failing_stage(tmp_path, capsys):
    data = tmp_path / "inputs"
    data.mkdir()
    (data / "edges.tsv").write_text("a\te00001\n")
    (data / "registrations.tsv").write_text("a\tD\n")
    (data / "journalists.tsv").write_text("j1\tout00\n")
    inputs = {"edges": str(data / "edges.tsv"),
              "registrations": str(data / "registrations.tsv"),
              "journalists": str(data / "journalists.tsv"),
              "anchors": str(data / "anchors.csv"),  # never created
              "statements": str(data / "statements.jsonl"),
              "articles": str(data / "articles.jsonl")}
    cfg = write_json(tmp_path / "cfg.json", {"inputs": inputs})
    out = tmp_path / "report"
    rc = main(["run", "--config", cfg, "--out", str(out)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "stage 'net build-matrix' failed" in err
    # aborted runs leave the incomplete marker but release the lock
    assert (out / pipeline.SENTINEL).exists()
    assert not (out / pipeline.LOCK).exists()


def test_run_without_synth_requires_inputs(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", {"seed": 1})
    rc = main(["run", "--config", cfg, "--out", str(tmp_path / "r")])
    assert rc == 2
    assert "inputs" in capsys.readouterr().err


def test_run_incomplete_inputs_reports_missing_keys(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json",
                     {"inputs": {"edges": "x.tsv"}})
    rc = main(["run", "--config", cfg, "--out", str(tmp_path / "r")])
    assert rc == 2
    assert "missing required keys" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# configuration handling
# ---------------------------------------------------------------------------

def test_config_rejects_unknown_keys(tmp_path, capsys):
    for payload, fragment in (
            ({"bogus": 1}, "unknown config keys"),
            ({"synth": {"n_elite": 3}}, "unknown synth config keys"),
            ({"scoring": {"lambda": 2}}, "unknown scoring config keys"),
            ({"inputs": {"edge": "x"}}, "unknown input keys")):
        cfg = write_json(tmp_path / "cfg.json", payload)
        rc = main(["run", "--config", cfg, "--synth",
                   "--out", str(tmp_path / "r")])
        assert rc == 2
        assert fragment in capsys.readouterr().err


def test_config_file_errors(tmp_path, capsys):
    rc = main(["run", "--config", str(tmp_path / "none.json"), "--synth",
               "--out", str(tmp_path / "r")])
    assert rc == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = main(["run", "--config", str(bad), "--synth",
               "--out", str(tmp_path / "r2")])
    assert rc == 2
    assert "malformed JSON" in capsys.readouterr().err


def test_config_roundtrip_preserves_digest(tmp_path):
    cfg = pipeline.config_from_dict(RUN_CONFIG)
    digest = io.config_digest(cfg.to_dict())
    path = tmp_path / "config.json"
    pipeline.write_config(path, cfg, digest)
    reloaded = pipeline.load_config(path)
    assert io.config_digest(reloaded.to_dict()) == digest


def test_pipeline_stage_error_carries_stage_and_cause():
    err = PipelineStageError("net fit", NumericalError("boom"))
    assert err.stage == "net fit"
    assert isinstance(err.cause, NumericalError)
    assert "net fit" in str(err) and "boom" in str(err)


def test_run_pipeline_api_returns_written_paths(tmp_path):
    cfg = pipeline.config_from_dict(RUN_CONFIG)
    paths = pipeline.run_pipeline(cfg, tmp_path / "r", use_synth=True)
    assert set(EXPECTED_RUN_FILES) <= set(p.name for p in paths.values())


def test_synth_corpus_rejects_groupless_file(tmp_path, capsys):
    truth = tmp_path / "truth.tsv"
    truth.write_text("a\t0.1\n")
    groups = tmp_path / "groups.tsv"
    groups.write_text("a\n")  # journalist format with no outlet labels
    rc = main(["synth", "corpus", "--truth", str(truth), "--groups", str(groups),
               "--out", str(tmp_path / "c.jsonl")])
    assert rc == 2
    assert "no accounts with group labels" in capsys.readouterr().err
