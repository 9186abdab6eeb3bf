"""End-to-end checks of the cfdetect command-line tool.

Usage: python3 test_cli.py <path-to-cfdetect> <test-data-dir>
"""

import csv
import json
import os
import subprocess
import sys
import tempfile
import unittest

EXE = None
DATA = None


def run(*args, check=None):
    proc = subprocess.run([EXE, *args], capture_output=True, text=True)
    if check is not None and proc.returncode != check:
        raise AssertionError(
            f"cfdetect {' '.join(args)} exited {proc.returncode}, expected {check}\n"
            f"stdout: {proc.stdout}\nstderr: {proc.stderr}"
        )
    return proc


def read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


def read_json(path):
    return json.loads(read(path))


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def write(path, text):
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path


class CliTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.dir, name)

    def test_help_and_bad_flags(self):
        self.assertIn("Subcommands", run("--help", check=0).stdout)
        run("train", "--no-such-flag", check=1)
        run(check=1)

    def test_grammar_decision_on_pretagged_input(self):
        conll = write(self.path("had.conll"), "# id: 1\nHad\tVBD\nyou\tPRP\nprovided\tVBN\n\n# id: 2\nDogs\tNNS\nbark\tVBP\n\n")
        out = run("grammar", "-i", conll, check=0).stdout.splitlines()
        self.assertEqual(out[0], "sentenceID\tdecision\tfeatures")
        self.assertTrue(out[1].startswith("1\t1\t"))
        self.assertTrue(out[2].startswith("2\t0\t"))
        self.assertEqual(len(out[1].split("\t")[2].split()), 50)

    def test_clean_profiles(self):
        src = write(
            self.path("in.csv"),
            'sentenceID,gold_label,sentence\n1,0,"If the lawsuit can be another means, then a larger benefit."\n',
        )
        out = run("clean", "-i", src, check=0).stdout
        self.assertIn("if the lawsuit can be another means then larger benefit", out)
        out = run("clean", "-i", src, "--profile", "cleaning_no_stopwords", check=0).stdout
        self.assertIn("lawsuit another means larger benefit", out)
        run("clean", "-i", src, "--profile", "fancy", check=1)

    def test_task1_train_predict_evaluate(self):
        model = self.path("m")
        report = self.path("holdout.json")
        run("train", "-i", f"{DATA}/task1_sample.csv", "--model-dir", model, "--min-freq", "1",
            "--algorithm", "logit", "--param", "epochs=30", "--holdout", "--report", report, check=0)
        for name in ("pipeline.json", "vocab.tsv", "classifier.model"):
            self.assertTrue(os.path.exists(os.path.join(model, name)), name)
        self.assertIn("f1", read_json(report))

        pred = self.path("pred.csv")
        run("predict", "-i", f"{DATA}/task1_sample.csv", "--model-dir", model, "-o", pred, check=0)
        rows = read_csv(pred)
        self.assertEqual(len(rows), 60)
        self.assertEqual(set(rows[0]), {"sentenceID", "prediction", "probability"})

        ev = self.path("eval.json")
        run("evaluate", "--pred", pred, "--gold", f"{DATA}/task1_sample.csv", "--report", ev, check=0)
        self.assertGreater(read_json(ev)["f1"], 0.9)

    def test_dry_run_writes_nothing(self):
        model = self.path("dry")
        run("train", "-i", f"{DATA}/task1_sample.csv", "--model-dir", model, "--min-freq", "1", "--dry-run", check=0)
        self.assertFalse(os.path.exists(model))

    def test_vectors_dimension_mismatch(self):
        vec4 = self.path("v4.txt")
        vec3 = self.path("v3.txt")
        rows = read_csv(f"{DATA}/task1_sample.csv")
        with open(vec4, "w") as f4, open(vec3, "w") as f3:
            for r in rows:
                y = int(r["gold_label"])
                f4.write(f"{r['sentenceID']}\t{y} {1 - y} 0.5 1\n")
                f3.write(f"{r['sentenceID']}\t{y} {1 - y} 0.5\n")
        model = self.path("vm")
        run("train", "-i", f"{DATA}/task1_sample.csv", "--model-dir", model, "--vectors", vec4, check=0)
        run("predict", "-i", f"{DATA}/task1_sample.csv", "--model-dir", model, "--vectors", vec4, check=0)
        proc = run("predict", "-i", f"{DATA}/task1_sample.csv", "--model-dir", model, "--vectors", vec3, check=1)
        self.assertIn("dimension", proc.stderr)

    def test_featurize_then_train_on_vectors(self):
        vecs = self.path("vecs.txt")
        run("featurize", "-i", f"{DATA}/task1_sample.csv", "--vectorizer", "bow", "--min-freq", "1", "-o", vecs, check=0)
        self.assertTrue(read(vecs).startswith("#cfdetect-vectors dim="))
        run("cv", "-i", f"{DATA}/task1_sample.csv", "--vectors", vecs, "--algorithm", "nb", "-k", "3", check=0)

    def test_cv_needs_enough_positives(self):
        rows = ["sentenceID,gold_label,sentence"]
        for i in range(20):
            rows.append(f"{i},{1 if i < 5 else 0},sentence number {i} about topic {i % 3}")
        src = write(self.path("few.csv"), "\n".join(rows) + "\n")
        run("cv", "-i", src, "--min-freq", "1", "-k", "3", check=0)
        proc = run("cv", "-i", src, "--min-freq", "1", "-k", "6", check=1)
        self.assertIn("fold", proc.stderr)

    def test_task2_pipeline(self):
        model = self.path("crf")
        run("train", "--task", "task2", "-i", f"{DATA}/task2_sample.conll", "--model-dir", model, check=0)
        spans = self.path("spans.csv")
        run("extract", "-i", f"{DATA}/task2_sample.conll", "--model-dir", model, "-o", spans, check=0)
        report = self.path("r.json")
        run("evaluate", "--task", "task2", "--pred", spans, "--gold", f"{DATA}/task2_sample.csv",
            "--report", report, check=0)
        r = read_json(report)
        self.assertGreater(r["exact_match"], 0.9)
        self.assertGreater(r["f1"], 0.9)
        labelled = self.path("pred.conll")
        run("predict", "--task", "task2", "-i", f"{DATA}/task2_sample.conll", "--model-dir", model,
            "-o", labelled, check=0)
        run("evaluate", "--task", "task2", "--pred", labelled, "--gold", f"{DATA}/task2_sample.conll", check=0)

    def test_tagger_training_and_csv_tagging(self):
        tagger = self.path("tagger.model")
        run("tag", "--train", f"{DATA}/task2_sample.conll", "--model", tagger, "--epochs", "5", check=0)
        out = self.path("tagged.conll")
        run("tag", "-i", f"{DATA}/task2_sample.csv", "--model", tagger, "-o", out, check=0)
        text = read(out)
        self.assertIn("# id: 200000", text)
        self.assertIn("would\tMD\tC", text)

    def test_config_file_and_overrides(self):
        cfg = write(self.path("run.json"), json.dumps({
            "task": "task1",
            "seed": 3,
            "input": os.path.abspath(f"{DATA}/task1_sample.csv"),
            "model_dir": "model",
            "vectorizer": {"kind": "tfidf", "min_freq": 1},
            "classifier": {"algorithm": "CART", "params": {"max_depth": 4}},
        }))
        run("train", "--config", cfg, check=0)
        self.assertTrue(os.path.exists(self.path("model/classifier.model")))
        self.assertIn("CART", read(self.path("model/classifier.model")).splitlines()[0])
        bad = write(self.path("bad.json"), json.dumps({"classifer": {}}))
        self.assertIn("classifer", run("train", "--config", bad, check=1).stderr)

    def test_missing_input_is_io_error(self):
        run("predict", "-i", self.path("nope.csv"), "--model-dir", self.dir, check=2)
        run("grammar", "-i", self.path("nope.conll"), check=2)

    def test_malformed_input_is_validation_error(self):
        src = write(self.path("bad.csv"), "sentenceID,gold_label,sentence\n1,7,text\n")
        proc = run("train", "-i", src, "--model-dir", self.path("x"), check=1)
        self.assertIn("line 2", proc.stderr)


if __name__ == "__main__":
    EXE, DATA = sys.argv[1], sys.argv[2]
    unittest.main(argv=[sys.argv[0], "-v"])
