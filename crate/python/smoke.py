"""Smoke test for the rena extension module.

Build and install first:  pip install --no-build-isolation -e crates/python
"""

import json

import rena

STUB = """
[[models]]
id = "stub"
display_name = "Stub"
endpoint = "stub:"
kind = "completion"
"""

ARTICLE = (
    "Laos reports two H5N1 avian influenza poultry outbreaks "
    "in Saravane province and Khantharath."
)


def main():
    schema = json.loads(rena.schema_json())
    assert len(schema["entity_types"]) == 8
    assert sum(len(r["pairs"]) for r in schema["relations"]) == 12

    extractor = rena.Extractor(STUB)
    assert extractor.models() == [("stub", "Stub")]
    resp = json.loads(extractor.extract(ARTICLE, "stub", 512))
    assert len(resp["relation_table"]) == 4
    spans = [s["text"] for s in resp["annotated"]["spans"]]
    assert "Saravane province" in spans, spans

    report = json.loads(rena.parse_output(resp["raw"]))
    assert report == resp["relations"]
    assert len(json.loads(rena.parse_output(resp["raw"], extension=True))["relations"]) == 5

    try:
        extractor.extract(ARTICLE, "gpt-9", 10)
    except ValueError as e:
        assert "gpt-9" in str(e)
    else:
        raise AssertionError("unknown model accepted")

    system, user = rena.render("annotation", "An article.")
    assert system.startswith("You are a smart and intelligent")
    assert "Article: An article." in user
    assert len(rena.template_digest("inference")) == 64

    doc = json.loads(rena.locate_entities("Ébola à Goma", json.dumps([{"type": "location", "text": "goma"}])))
    assert doc["spans"][0]["start"] == 8

    gold = [{"doc_id": "d", "article": ARTICLE, "triples": report["relations"]}]
    scores = json.loads(rena.evaluate(json.dumps(gold), json.dumps([report])))
    assert scores["ner"]["f1"] == 1.0 and scores["re"]["f1"] == 1.0

    train, val = rena.split(300)
    assert (len(train), len(val)) == (297, 3)
    assert "lora_r: 64" in rena.emit_finetune_config("base").splitlines()
    assert abs(rena.f1(0.88, 0.88) - 0.88) < 1e-12

    example = {"article": ARTICLE, "triples": report["relations"]}
    prompt, completion = rena.training_record(json.dumps(example))
    assert ARTICLE in prompt and completion.startswith("1) ")
    print("ok")


if __name__ == "__main__":
    main()
