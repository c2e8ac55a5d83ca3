import json

import pytest

from gest import kernels
from gest.cli import EXIT_DATA, EXIT_USAGE, main, read_config
from gest.core import canonical_form
from gest.parser import parse_text
from gest.serde import from_text

PLAYGROUND = "John is in the playground. Bob is in the office. John picked up the football. Bob went to the kitchen.\n"


@pytest.fixture
def story(tmp_path):
    p = tmp_path / "story.txt"
    p.write_text(PLAYGROUND)
    return p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_to_stdout(capsys, story):
    code, out, _ = run(capsys, "parse", story)
    assert code == 0
    assert canonical_form(from_text(out)) == canonical_form(parse_text(PLAYGROUND))


def test_parse_v2_by_extension_and_serialize_back(capsys, story, tmp_path):
    g2 = tmp_path / "s.gest2"
    assert run(capsys, "parse", story, "-o", g2)[0] == 0
    assert g2.read_text().startswith("[")
    code, out, _ = run(capsys, "serialize", g2, "--format", "v1")
    assert code == 0 and out.startswith("n0 : ")
    assert canonical_form(from_text(out)) == canonical_form(parse_text(PLAYGROUND))


def test_parse_babi_multi_story(capsys, tmp_path):
    p = tmp_path / "qa.txt"
    p.write_text("1 Mary moved to the bathroom.\n2 Where is Mary? \tbathroom\t1\n1 John went to the office.\n")
    assert run(capsys, "parse", p)[0] == EXIT_USAGE
    assert run(capsys, "parse", p, "-o", tmp_path / "out")[0] == 0
    assert sorted(f.name for f in (tmp_path / "out").iterdir()) == ["story0000.gest", "story0001.gest"]
    code, out, _ = run(capsys, "parse", p, "--story", "1")
    assert code == 0 and "office" in out
    assert run(capsys, "parse", p, "--story", "5")[0] == EXIT_USAGE


def test_parse_svo_reports_margin(capsys, tmp_path):
    p = tmp_path / "v.jsonl"
    p.write_text('{"subject": "man", "verb": "opens", "object": "door", "start": 0, "end": 2}\n'
                 '{"subject": "man", "verb": "sits", "start": 2.5, "end": 4}\n')
    code, out, err = run(capsys, "--margin", "0.75", "parse", p)
    assert code == 0 and "same_time margin: 0.75 s" in err and "temporal:next" in out


def test_match(capsys, story, tmp_path):
    a = tmp_path / "a.gest"
    run(capsys, "parse", story, "-o", a)
    code, out, _ = run(capsys, "match", a, a, "--brute-force")
    assert code == 0
    lines = dict(l.split(None, 1) for l in out.splitlines())
    assert lines["f_hat"] == "1.000000" and lines["f"] == lines["brute"]
    assert "n0->n0" in lines["assignment"]
    code, out, _ = run(capsys, "match", a, a, "--json", "--mode", "single")
    data = json.loads(out)
    assert data["f_hat"] == pytest.approx(1.0) and data["mode"] == "single"


def test_metrics(capsys, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("a b c d")
    b.write_text("a c d")
    code, out, _ = run(capsys, "metrics", a, b, "--json")
    data = json.loads(out)
    assert code == 0 and set(data) == {"bleu4", "bleu4_sym", "rouge_l", "rouge_l_sym"}
    assert data["rouge_l"] == pytest.approx(0.879808, abs=1e-6)


def test_synth_eval_fuse(capsys, tmp_path):
    corpus = tmp_path / "corpus"
    code, out, _ = run(capsys, "--seed", "3", "synth", corpus, "--groups", "5", "--variants", "2")
    assert code == 0 and "wrote 10 items" in out
    scores, labels, rep = tmp_path / "scores.tsv", tmp_path / "labels.tsv", tmp_path / "rep"
    code, out, _ = run(capsys, "eval", corpus, "--negatives", "12", "--out", rep, "--scores", scores, "--labels", labels)
    assert code == 0
    report = json.loads(out)
    assert report["n_positive"] == 5 and report["n_negative"] == 12
    assert report["notes"]["backend"] == kernels.BACKEND
    assert (rep / "report.json").exists() and (rep / "report.csv").exists()
    code, out, _ = run(capsys, "fuse", scores, scores, labels, "--metric1", "gest", "--metric2", "bleu4")
    assert code == 0
    fused = json.loads(out)
    assert set(fused["model"]) == {"w0", "w1", "w2", "fallback"}
    assert "fused" in fused["report"]["metrics"]
    assert run(capsys, "fuse", scores, scores, labels)[0] == EXIT_USAGE


def test_config_file(capsys, tmp_path, story):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# weights\nw_action = 0.7\nw_entities=0.3\nmode=rounds\n")
    assert read_config(cfg) == {"w_action": 0.7, "w_entities": 0.3, "mode": "rounds"}
    a = tmp_path / "a.gest"
    run(capsys, "parse", story, "-o", a)
    code, out, _ = run(capsys, "match", a, a, "--json", "--config", cfg)
    assert code == 0 and json.loads(out)["mode"] == "rounds"
    cfg.write_text("colour=blue\n")
    assert run(capsys, "match", a, a, "--config", cfg)[0] == EXIT_USAGE
    cfg.write_text("w_action=0.9\nw_entities=0.9\n")
    assert run(capsys, "match", a, a, "--config", cfg)[0] == EXIT_DATA


def test_data_errors(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("Mary sang a song.\n")
    code, _, err = run(capsys, "parse", bad)
    assert code == EXIT_DATA and err.startswith("gest parse:")
    assert run(capsys, "parse", tmp_path / "nope.txt")[0] == EXIT_DATA
    assert run(capsys, "eval", tmp_path / "nope")[0] == EXIT_DATA
    g = tmp_path / "g.gest"
    g.write_text("n0 : a\n")
    missing = tmp_path / "missing.vec"
    assert run(capsys, "--embeddings", missing, "match", g, g)[0] == EXIT_DATA


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["match", "a.gest"])
    assert exc.value.code == EXIT_USAGE
