"""End-to-end check of the Python bindings on a small synthetic corpus.

Uses an installed `killmatrix` module when available; otherwise builds the
extension with cargo and imports it from a temporary directory.
"""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module(tmp: Path):
    try:
        import killmatrix

        return killmatrix
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "killmatrix-py"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libkillmatrix.so"
    shutil.copy(lib, tmp / "killmatrix.so")
    sys.path.insert(0, str(tmp))
    import killmatrix

    return killmatrix


def main() -> None:
    tmp = Path(tempfile.mkdtemp(prefix="killmatrix-smoke-"))
    try:
        km = load_module(tmp)
        print("killmatrix", km.__version__)

        assert km.statement_diff("a <= b", "a >= b") == "['<=', '>=']"
        assert km.skeleton_modification("a == b", "false") == ("expr1 == expr2", "expr")
        assert km.combine(0.2, 0.6) == 0.4
        assert km.apfd([0, 1, 2, 3], {"f": [0]}) == 0.875

        c = km.confusion([0.9, 0.2, 0.6], [True, False, False], 0.5)
        assert (c["tp"], c["fp"], c["tn"]) == (1, 1, 1)
        report = km.optimize_threshold([0.05, 0.4, 0.7, 0.95], [False, False, True, True])
        assert report["selected"] in report["candidates"]

        order = km.prioritize({1: [10, 11], 2: [10], 3: [12]}, "additional", 0)
        assert order[0] == 1 and sorted(order) == [1, 2, 3]

        summary = km.synth(str(tmp / "corpus"), mutants=1500, seed=4)
        print("corpus", summary)
        rows = km.extract(str(tmp / "corpus"), str(tmp / "features.csv"))
        assert rows == summary["pairs"]

        model = km.Model.train(str(tmp / "features.csv"), seed=1, trees=30, iterations=40)
        model.save(str(tmp / "model.json"))
        model = km.Model.load(str(tmp / "model.json"))
        print(model)
        scores = model.predict(str(tmp / "features.csv"))
        assert len(scores) == rows and all(0.0 <= s <= 1.0 for s in scores)
        imp = model.importance()
        top = max(range(len(imp["features"])), key=lambda i: imp["forest"]["normalized"][i])
        assert imp["features"][top] == "statement_diff", imp["features"][top]

        model.predict_matrix(str(tmp / "features.csv"), str(tmp / "predicted.csv"), 0.5)
        ev = km.evaluate(str(tmp / "predicted.csv"), str(tmp / "features.csv"))
        assert ev["pair_level"]["f1"] > 0.95, ev["pair_level"]

        cfg = tmp / "experiment.json"
        cfg.write_text(json.dumps({"scenario": "same_version", "corpora": ["corpus"], "seed": 2}))
        result = km.experiment(str(cfg), str(tmp / "run"))
        print("experiment F1", result["pair_level"]["f1"], "APE", result["ape"])
        assert (tmp / "run" / "eval_report.json").exists()

        try:
            km.Model.load(str(tmp / "missing.json"))
        except OSError:
            pass
        else:
            raise AssertionError("loading a missing model should raise OSError")
        print("ok")
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


if __name__ == "__main__":
    main()
