import json
from pathlib import Path

import numpy as np
import pytest

import ecgdx

SPECS = Path(__file__).resolve().parents[2] / "specs"


def c34_spec(name):
    spec = json.loads((SPECS / name).read_text())
    spec["targets"] = {"C34": spec["targets"]["C34"]}
    return json.dumps(spec)


@pytest.fixture(scope="module")
def trained():
    cohort = ecgdx.synth_cohort(c34_spec("mimic_like.json"), 8000, seed=3)
    folds = ecgdx.make_folds(cohort, "C34", seed=1)
    train_rows = np.flatnonzero(folds < 18).tolist()
    val_rows = np.flatnonzero(folds == 18).tolist()
    test_rows = np.flatnonzero(folds == 19).tolist()
    model = ecgdx.train(cohort.subset(train_rows), cohort.subset(val_rows), "C34")
    return cohort, model, cohort.subset(test_rows)


def test_auroc_matches_pairwise_count():
    rng = np.random.default_rng(0)
    scores = rng.integers(0, 5, size=40).astype(float)
    labels = rng.integers(0, 2, size=40).astype(np.uint8)
    labels[:2] = [0, 1]
    pos, neg = scores[labels == 1], scores[labels == 0]
    expected = ((pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()) / (
        len(pos) * len(neg)
    )
    assert ecgdx.auroc(scores, labels) == expected
    assert ecgdx.auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_bootstrap_is_deterministic():
    rng = np.random.default_rng(1)
    labels = (rng.random(500) < 0.3).astype(np.uint8)
    scores = rng.normal(size=500) + labels
    a = ecgdx.bootstrap_ci(scores, labels, 300, seed=5)
    b = ecgdx.bootstrap_ci(scores, labels, 300, seed=5, threads=2)
    assert a == b
    assert 0.0 <= a[0] <= a[1] <= 1.0


def test_errors_carry_codes():
    with pytest.raises(ecgdx.EcgdxError) as info:
        ecgdx.auroc([1.0, 2.0], [1, 1])
    assert info.value.code == "SingleClass"
    with pytest.raises(ecgdx.EcgdxError) as info:
        ecgdx.synth_cohort(json.dumps({"features": {}}), 10)
    assert info.value.code == "BadSpec"


def test_cohort_round_trip():
    cohort = ecgdx.synth_cohort(c34_spec("ecgview_like.json"), 200, seed=9)
    assert len(cohort) == 200
    assert cohort.features.shape == (200, 10)
    again = ecgdx.parse_cohort_csv(cohort.to_csv())
    np.testing.assert_array_equal(again.features, cohort.features)
    np.testing.assert_array_equal(again.labels["C34"], cohort.labels["C34"])
    built = ecgdx.Cohort(cohort.features, {"dx_C34": cohort.labels["C34"]})
    assert built.prevalence("C34") == cohort.prevalence("C34")


def test_train_predict_explain(trained):
    cohort, model, test = trained
    assert model.best_iteration == model.n_trees >= 1
    report = ecgdx.evaluate(model, test, n_bootstrap=200, seed=2)
    assert report["auroc"] > 0.6
    assert report["ci_low"] <= report["ci_high"]

    x = test.features[:200]
    margins = model.predict_margin(x)
    probs = model.predict_proba(x)
    np.testing.assert_allclose(probs, 1.0 / (1.0 + np.exp(-margins)), rtol=1e-12)
    base, phi = ecgdx.shap_values(model, x)
    np.testing.assert_allclose(base + phi.sum(axis=1), margins, atol=1e-9)

    clone = ecgdx.Model.from_json(model.to_json())
    assert clone.to_json() == model.to_json()
    np.testing.assert_array_equal(clone.predict_margin(x), margins)

    csv, svg = ecgdx.beeswarm(model, x, seed=4)
    assert csv.count("\n") == 1 + 10 * 200
    assert svg.startswith("<svg") and svg.count("<circle") == 2000


def test_cli_in_process(tmp_path):
    out = tmp_path / "cohort.csv"
    code, _, err = ecgdx.run_cli(
        ["synth", "--spec", str(SPECS / "mimic_like.json"), "--n", "500", "--seed", "1", "--out", str(out)]
    )
    assert code == 0, err
    assert len(ecgdx.load_cohort(out)) == 500
    code, _, err = ecgdx.run_cli(["train", "--cohort", str(out), "--target", "NOPE", "--out", str(tmp_path / "m")])
    assert code == 2
    assert "NOPE" in err
