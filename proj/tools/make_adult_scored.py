"""Score the UCI Adult data with two random forests and write data/adult_scored.csv.

Small uses sex, age, workclass, education years. Full adds race and marital
status. Predictions are out-of-fold (5-fold), so each row is scored by a forest
that did not see it. Fixed seeds; rerunning gives the same file for a given
scikit-learn version.
"""
import sys
from pathlib import Path

import pandas as pd
from sklearn.ensemble import RandomForestClassifier
from sklearn.model_selection import StratifiedKFold, cross_val_predict

COLUMNS = ["age", "workclass", "fnlwgt", "education", "education_num", "marital_status", "occupation",
           "relationship", "race", "sex", "capital_gain", "capital_loss", "hours_per_week", "native_country",
           "income"]

EDUCATION = {  # education years -> coarse ordered level
    **{k: "Dropout" for k in range(1, 9)},
    9: "HS-grad",
    10: "Some-college",
    11: "Associates",
    12: "Associates",
    13: "Bachelors",
    14: "Advanced",
    15: "Advanced",
    16: "Advanced",
}
MARITAL = {
    "Married-civ-spouse": "Married",
    "Married-AF-spouse": "Married",
    "Never-married": "Never-married",
    "Divorced": "Separated",
    "Separated": "Separated",
    "Married-spouse-absent": "Separated",
    "Widowed": "Widowed",
}


def main(root: Path) -> None:
    df = pd.read_csv(root / "data" / "adult.data", header=None, names=COLUMNS, skipinitialspace=True,
                     na_values="?")
    df = df.dropna(subset=["workclass"]).reset_index(drop=True)
    y = (df["income"] == ">50K").astype(int)
    df["education_level"] = df["education_num"].map(EDUCATION)
    df["marital"] = df["marital_status"].map(MARITAL)

    small = pd.get_dummies(df[["sex", "age", "workclass", "education_num"]], dtype=float)
    full = pd.get_dummies(df[["sex", "age", "workclass", "education_num", "race", "marital"]], dtype=float)
    folds = StratifiedKFold(n_splits=5, shuffle=True, random_state=20180101)
    out = df[["age", "workclass", "education_num", "education_level", "marital", "race", "sex"]].copy()
    out["income"] = y
    for name, X in (("small", small), ("full", full)):
        rf = RandomForestClassifier(n_estimators=200, min_samples_leaf=20, random_state=7, n_jobs=1)
        p = cross_val_predict(rf, X, y, cv=folds, method="predict_proba")[:, 1]
        out[name + "_score"] = p.round(6)
    out.to_csv(root / "data" / "adult_scored.csv", index=False)


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent)
