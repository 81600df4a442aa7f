import json
import shutil
import time

import pytest

from clawcanvas.build import compile_artifacts
from clawcanvas.layers import Image, load_image
from clawcanvas.pipeline import (
    ClientTimeout,
    FixtureClients,
    LedgerIncomplete,
    PipelineConfig,
    PipelineLedger,
    ReviewReport,
    StageFailure,
    attribute_failure,
    bundled_fixtures,
    check_ledger,
    run_pipeline,
    select_backend,
)
from clawcanvas.pipeline.clients import Finding
from clawcanvas.pipeline.ledger import StageTrace
from clawcanvas.records import CanvasConfig, KnowledgeFact, ObjectSpec, TextSpec, make_record, parse_records
from clawcanvas.svg import parse_svg_subset

ARTIFACTS = ["facts.jsonl", "record.scene.jsonl", "layout.json", "sketch.svg", "text.html", "generated.png", "verify.report.json", "review.json", "ledger.jsonl"]


def case(name):
    return FixtureClients(bundled_fixtures() / name).clients()


def copy_case(name, tmp_path):
    dst = tmp_path / f"fixture_{name}"
    shutil.copytree(bundled_fixtures() / name, dst)
    return dst


def run(name, tmp_path, clients=None, **kw):
    return run_pipeline("draw it", clients or case(name), PipelineConfig(tmp_path / "work", **kw))


def test_happy_path(tmp_path):
    res = run("happy", tmp_path)
    assert res.passed and res.attribution is None
    assert res.ledger.stages() == ["conceptualize", "sketch", "color", "review"]
    assert check_ledger(res.ledger, res.workdir) == []
    for name in ARTIFACTS:
        assert (res.workdir / name).is_file(), name
    on_disk = PipelineLedger.load(res.workdir / "ledger.jsonl")
    assert [e.to_dict() for e in on_disk.entries] == [e.to_dict() for e in res.ledger.entries]


def test_each_client_called_once(tmp_path):
    res = run("happy", tmp_path)
    calls = [(c.client, c.attempt, c.status) for c in res.ledger.calls()]
    assert calls == [("search", 1, "ok"), ("reasoner", 1, "ok"), ("sketcher", 1, "ok"), ("generator", 1, "ok"), ("reviewer", 1, "ok")]


def test_invalid_record_fails_conceptualize(tmp_path):
    c = case("happy")
    c.reasoner = lambda request, facts: b'{"kind":"object","id":"a","count":0}\n'
    with pytest.raises(StageFailure) as e:
        run("happy", tmp_path, clients=c)
    assert e.value.stage == "conceptualize"
    assert e.value.ledger.stages() == ["conceptualize"]
    assert e.value.ledger.stage("conceptualize").status == "failed"


def test_cyclic_record_fails_conceptualize(tmp_path):
    c = case("happy")
    c.reasoner = lambda request, facts: (
        b'{"id":"a","kind":"object"}\n{"id":"b","kind":"object"}\n'
        b'{"kind":"relation","object":"b","relation":"above","subject":"a"}\n'
        b'{"kind":"relation","object":"a","relation":"above","subject":"b"}\n'
    )
    with pytest.raises(StageFailure) as e:
        run("happy", tmp_path, clients=c)
    assert e.value.stage == "conceptualize"


def test_missing_generator_fixture_fails_color_after_retry(tmp_path):
    src = copy_case("happy", tmp_path)
    (src / "generated.png").unlink()
    with pytest.raises(StageFailure) as e:
        run("happy", tmp_path, clients=FixtureClients(src).clients())
    assert e.value.stage == "color"
    gen_calls = [c for c in e.value.ledger.calls() if c.client == "generator"]
    assert [(c.attempt, c.status) for c in gen_calls] == [(1, "error"), (2, "error")]
    assert check_ledger(e.value.ledger, tmp_path / "work") == []


def test_retry_recovers(tmp_path):
    c = case("happy")
    real, attempts = c.generator, []

    def flaky(*args):
        attempts.append(1)
        if len(attempts) == 1:
            raise ConnectionError("transient")
        return real(*args)

    c.generator = flaky
    res = run("happy", tmp_path, clients=c)
    assert res.passed
    assert [(x.attempt, x.status) for x in res.ledger.calls() if x.client == "generator"] == [(1, "error"), (2, "ok")]


def test_timeout(tmp_path):
    c = case("happy")
    c.reviewer = lambda image, record: time.sleep(0.5)
    with pytest.raises(ClientTimeout) as e:
        run("happy", tmp_path, clients=c, timeout=0.05)
    assert e.value.stage == "review" and e.value.client == "reviewer"
    assert [x.status for x in e.value.ledger.calls() if x.client == "reviewer"] == ["timeout", "timeout"]


def test_replay_is_deterministic(tmp_path):
    a = run_pipeline("draw it", case("happy"), PipelineConfig(tmp_path / "a"))
    b = run_pipeline("draw it", case("happy"), PipelineConfig(tmp_path / "b"))
    assert a.ledger.without_timestamps() == b.ledger.without_timestamps()
    for name in ARTIFACTS[:-1]:
        assert (a.workdir / name).read_bytes() == (b.workdir / name).read_bytes(), name


def test_seed_override_reaches_layout(tmp_path):
    a = run("happy", tmp_path / "x", seed=1)
    b = run("happy", tmp_path / "y", seed=2)
    assert parse_records((a.workdir / "record.scene.jsonl").read_bytes()).canvas.seed == 1
    assert (a.workdir / "layout.json").read_bytes() != (b.workdir / "layout.json").read_bytes()


def test_physics_annotation_in_sketch(tmp_path):
    ann = {"type": "jet", "H": 1.0, "h": 0.5, "scale": 100, "origin": [20, 500]}
    res = run("happy", tmp_path, annotations=(ann,))
    assert "physics" in res.backends
    assert b'id="jet:arc"' in (res.workdir / "sketch.svg").read_bytes()
    assert res.passed


# --- attribution -------------------------------------------------------------------


@pytest.mark.parametrize("name, stage", [("bad_fact", "conceptualize"), ("bad_render", "color")])
def test_fixture_attribution(tmp_path, name, stage):
    res = run(name, tmp_path)
    assert not res.passed
    assert res.attribution == stage
    assert check_ledger(res.ledger, res.workdir) == []


def test_bad_sketch_aborts_at_sketch(tmp_path):
    with pytest.raises(StageFailure) as e:
        run("bad_sketch", tmp_path)
    assert e.value.stage == "sketch"
    ledger = e.value.ledger
    assert ledger.stages() == ["conceptualize", "sketch"]
    record = parse_records((tmp_path / "work" / "record.scene.jsonl").read_bytes())
    sketch = parse_svg_subset((tmp_path / "work" / "sketch.svg").read_bytes())
    review = ReviewReport.from_dict(json.loads((bundled_fixtures() / "bad_sketch" / "review.json").read_bytes()))
    assert attribute_failure(ledger, review, record, sketch) == "sketch"


def concept_ledger(fact_ids=(), claims=()):
    ledger = PipelineLedger()
    ledger.append(StageTrace("conceptualize", notes={"fact_ids": list(fact_ids), "fact_claims": list(claims)}))
    ledger.append(StageTrace("sketch"))
    return ledger


def apples(n=3, facts=()):
    return make_record(CanvasConfig(512, 512), [ObjectSpec("apple", "apple", n, "red", "small")], facts=facts)


def test_contradicted_fact_is_conceptualize():
    claim = "The final is hosted by X"
    r = apples(facts=[KnowledgeFact(claim, id="f1")])
    ir = compile_artifacts(r).ir
    review = ReviewReport("fail", (Finding("factual", "host city is Y", ("s1",)),))
    assert attribute_failure(concept_ledger(["s1"], ["The final is hosted by Y"]), review, r, ir) == "conceptualize"


def test_missing_apple_is_sketch():
    r = apples()
    ir = compile_artifacts(r).ir
    two = ir.with_nodes(n for n in ir.nodes if n.id != "apple#2")
    review = ReviewReport("fail", (Finding("visual", "only two apples"),))
    assert attribute_failure(concept_ledger(), review, r, two) == "sketch"


def test_clean_sketch_visual_miss_is_color():
    r = apples()
    review = ReviewReport("fail", (Finding("visual", "four apples rendered"),))
    assert attribute_failure(concept_ledger(), review, r, compile_artifacts(r).ir) == "color"


def test_supported_factual_finding_is_inconclusive():
    claim = "Apples are red"
    r = apples(facts=[KnowledgeFact(claim, id="f1")])
    review = ReviewReport("fail", (Finding("factual", "looks off", ("f1",)),))
    assert attribute_failure(concept_ledger([], [claim]), review, r, compile_artifacts(r).ir) == "inconclusive"


def test_earliest_stage_wins():
    r = apples()
    ir = compile_artifacts(r).ir
    two = ir.with_nodes(n for n in ir.nodes if n.id != "apple#2")
    review = ReviewReport("fail", (Finding("visual", "x"), Finding("factual", "y", ("s9",))))
    assert attribute_failure(concept_ledger(["s9"]), review, r, two) == "conceptualize"


def test_incomplete_ledger():
    r = apples()
    with pytest.raises(LedgerIncomplete):
        attribute_failure(PipelineLedger(), ReviewReport("fail", (Finding("visual", "x"),)), r, compile_artifacts(r).ir)


def test_review_report_rules():
    with pytest.raises(ValueError):
        ReviewReport("fail")
    with pytest.raises(ValueError):
        Finding("aesthetic", "x")
    rep = ReviewReport("fail", (Finding("visual", "x", ("a",)),))
    assert ReviewReport.from_dict(rep.to_dict()) == rep


# --- backend selection ---------------------------------------------------------------


def test_objects_only():
    r = make_record(CanvasConfig(), [ObjectSpec(f"o{k}", "thing") for k in range(5)])
    assert select_backend(r) == {"svg_composition"}


def test_menu_with_six_blocks():
    texts = [TextSpec(f"t{k}", f"dish {k}") for k in range(6)]
    assert select_backend(make_record(CanvasConfig(), [ObjectSpec("plate", "plate")], texts)) == {"svg_composition", "html_text"}
    assert select_backend(make_record(CanvasConfig(), texts=texts)) == {"html_text"}


def test_long_single_text_goes_to_html():
    assert "html_text" in select_backend(make_record(CanvasConfig(), texts=[TextSpec("t", "x" * 121)]))
    assert "html_text" not in select_backend(make_record(CanvasConfig(), texts=[TextSpec("t", "x" * 120)]))


def test_jet_annotation_selects_physics():
    r = make_record(CanvasConfig(), [ObjectSpec("tank", "tank")])
    assert "physics" in select_backend(r, [{"type": "jet", "H": 1.0, "h": 0.5}])
    phys = make_record(CanvasConfig(extra={"physics": [{"type": "jet"}]}), [ObjectSpec("tank", "tank")])
    assert select_backend(phys) == {"svg_composition", "physics"}


def test_generator_output_must_be_image(tmp_path):
    c = case("happy")
    c.generator = lambda *a: b"not an image"
    with pytest.raises(StageFailure) as e:
        run("happy", tmp_path, clients=c)
    assert e.value.stage == "color"


def test_generated_image_is_written(tmp_path):
    res = run("happy", tmp_path)
    assert isinstance(res.image, Image)
    assert load_image(res.workdir / "generated.png") == res.image
