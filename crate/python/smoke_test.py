"""Smoke test for the `instructbias` extension module.

Build and install first (from the repository root):
    maturin develop -m crates/py/Cargo.toml
then run:  python python/smoke_test.py
"""

import json
import os
import tempfile

import instructbias as ib


def task_file(task_id, definition, words, n):
    instances = []
    for i in range(n):
        text = f"A {words[i % len(words)]} sits near the {words[(i + 1) % len(words)]}."
        instances.append({"id": f"{task_id}-{i}", "input": text, "output": [text]})
    return {
        "Contributors": [],
        "Source": ["synthetic"],
        "Categories": ["Text Modification" if task_id.endswith(("0", "2", "4")) else "Question Answering"],
        "Domains": ["General"],
        "Input_language": ["English"],
        "Output_language": ["English"],
        "Instruction_language": ["English"],
        "Definition": [definition],
        "Positive Examples": [{"input": f"The {words[0]} runs.", "output": f"The {words[0]} rests.", "explanation": "Opposite."}],
        "Negative Examples": [],
        "Instances": instances,
    }


def main():
    assert ib.tokenize("The Cats, running!") == ["the", "cats", "running"]
    assert ib.lemmas("the dogs are running") == ["dog", "run"]
    assert ib.jaccard("dog cat", "dog bird") == 1 / 3
    assert ib.overlap("dog cat", "dog bird") == 0.5
    assert abs(ib.rouge_l("the cat sat", ["the cat sat on the mat"]) - 2 / 3) < 1e-9
    assert ib.bin_index(0.05, 20) == 1 and ib.bin_index(1.0, 20) == 19
    assert ib.INSTANCE_CAP == 6500

    vocab = ["man", "park", "dog", "river", "boat", "tree", "city", "train", "lake", "road", "bird", "hill"]
    with tempfile.TemporaryDirectory() as d:
        for t in range(12):
            words = vocab[t:] + vocab[:t]
            body = task_file(f"task{t:03d}", f"Rewrite the sentence about the {words[0]}.", words, 8)
            with open(os.path.join(d, f"task{t:03d}.json"), "w") as f:
                json.dump(body, f)

        corpus = ib.Corpus.load(d)
        assert len(corpus) == 12 and corpus.errors == []
        task = corpus.get("task003")
        assert len(task) == 8 and task.version == 0
        assert 0.0 <= task.metric("jaccard:word") <= 1.0
        assert task.metric("sample_length", "definition") == 6
        assert len(task.instance_similarities()) == 8
        run = task.evaluate("echo", limit=4)
        assert run["status"] == "DONE" and run["overall"] == 1.0

        report = os.path.join(d, "report.csv")
        rows = corpus.write_report(report, ["unique_vocab", "jaccard:word"])
        assert rows >= 12

        engine = ib.Engine(corpus, seed=1)
        state = engine.set_root("s", "task003")
        assert len(state["ranking"]["neighbors"]) == 9
        chord = engine.chord("s", "NORM_WORD_OVERLAP", "positive_examples", 0.6)
        assert len(chord["body"]["values"]) == 10
        assert len(engine.overview(2)["points"]) == 12

        run_id = engine.run_eval("s", "task003", limit=8)
        assert engine.wait(run_id)["status"] == "DONE"

        version = engine.modify("s", "task003", "Produce a contradiction.")
        assert version == 1
        assert engine.metrics("s")["root"]["version"] == 1

        try:
            engine.set_root("s", "nope")
        except KeyError:
            pass
        else:
            raise AssertionError("unknown task accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
