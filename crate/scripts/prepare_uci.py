#!/usr/bin/env python3
"""Build the CSV + schema files under data/ from locally available copies of
the UCI Adult, German credit and Heart disease (Cleveland) datasets.

The raw files are read straight out of two PyPI distributions that vendor
them, so no access to the UCI site is needed:

    pip download --no-deps responsibly==0.1.2 orange3==3.39.0 -d /tmp/uci
    python3 scripts/prepare_uci.py /tmp/uci data/

Rows with missing cells ("?") are dropped; the Rust loader rejects them.
"""
import csv
import glob
import io
import os
import sys
import zipfile

ADULT_COLUMNS = [
    ("age", "numeric"), ("workclass", "categorical"), ("fnlwgt", "numeric"),
    ("education", "categorical"), ("education_num", "numeric"),
    ("marital_status", "categorical"), ("occupation", "categorical"),
    ("relationship", "categorical"), ("race", "categorical"),
    ("sex", "categorical"), ("capital_gain", "numeric"),
    ("capital_loss", "numeric"), ("hours_per_week", "numeric"),
    ("native_country", "categorical"), ("income", "categorical"),
]

GERMAN_COLUMNS = [
    ("status", "categorical"), ("duration", "numeric"),
    ("credit_history", "categorical"), ("purpose", "categorical"),
    ("credit_amount", "numeric"), ("savings", "categorical"),
    ("present_employment", "categorical"), ("installment_rate", "numeric"),
    ("status_sex", "categorical"), ("other_debtors", "categorical"),
    ("present_residence_since", "numeric"), ("property", "categorical"),
    ("age", "numeric"), ("installment_plans", "categorical"),
    ("housing", "categorical"), ("number_of_existing_credits", "numeric"),
    ("job", "categorical"), ("number_of_people_liable_for", "numeric"),
    ("telephone", "categorical"), ("foreign_worker", "categorical"),
    ("credit", "categorical"),
]

HEART_COLUMNS = [
    ("age", "numeric"), ("sex", "categorical"), ("chest_pain", "categorical"),
    ("rest_sbp", "numeric"), ("cholesterol", "numeric"),
    ("fasting_blood_sugar", "categorical"), ("rest_ecg", "categorical"),
    ("max_hr", "numeric"), ("exercise_angina", "categorical"),
    ("st_depression", "numeric"), ("st_slope", "categorical"),
    ("major_vessels", "numeric"), ("thal", "categorical"),
    ("heart_condition", "categorical"),
]


def wheel(directory, prefix):
    hits = sorted(glob.glob(os.path.join(directory, prefix + "*.whl")))
    if not hits:
        sys.exit(f"no {prefix}*.whl in {directory}")
    return zipfile.ZipFile(hits[-1])


def write(out_dir, name, columns, rows, target, sensitive):
    path = os.path.join(out_dir, name + ".csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c for c, _ in columns])
        w.writerows(rows)
    target_col, positive = target
    lines = ["[target]", f'positive = "{positive}"', "", "[sensitive]"]
    sens_col = dict(sensitive)["column"].strip('"')
    lines += [f"{k} = {v}" for k, v in sensitive if k != "column"]
    lines += ["", "[columns]"]
    for col, kind in columns:
        role = "target" if col == target_col else "sensitive" if col == sens_col else "feature"
        lines.append(f'{col} = {{ kind = "{kind}", role = "{role}" }}')
    with open(os.path.join(out_dir, name + ".schema.toml"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{name}: {len(rows)} rows -> {path}")


def adult(src, out_dir):
    z = wheel(src, "responsibly")
    rows = []
    for member, skip in (("adult.data", 0), ("adult.test", 1)):
        text = z.read(f"responsibly/dataset/adult/{member}").decode()
        for line in text.splitlines()[skip:]:
            cells = [c.strip() for c in line.split(",")]
            if len(cells) != len(ADULT_COLUMNS) or "?" in cells:
                continue
            cells[-1] = cells[-1].rstrip(".")
            rows.append(cells)
    write(out_dir, "adult", ADULT_COLUMNS, rows, ("income", ">50K"),
          [("column", '"race"'), ("rule", '"equals"'), ("value", '"White"'),
           ("group_a", '"white"'), ("group_b", '"non-white"')])


def german(src, out_dir):
    z = wheel(src, "responsibly")
    text = z.read("responsibly/dataset/german/german.data").decode()
    rows = [line.split() for line in text.splitlines() if line.strip()]
    write(out_dir, "german", GERMAN_COLUMNS, rows, ("credit", "1"),
          [("column", '"age"'), ("rule", '"below_mean"'),
           ("group_a", '"below-mean-age"'), ("group_b", '"above-mean-age"')])


def heart(src, out_dir):
    z = wheel(src, "orange3")
    text = z.read("Orange/datasets/heart_disease.tab").decode()
    rows = []
    for line in text.splitlines()[3:]:
        cells = [c.strip() for c in line.split("\t")]
        if len(cells) != len(HEART_COLUMNS) or "?" in cells or "" in cells:
            continue
        rows.append(cells)
    write(out_dir, "heart", HEART_COLUMNS, rows, ("heart_condition", "1"),
          [("column", '"age"'), ("rule", '"below_mean"'),
           ("group_a", '"below-mean-age"'), ("group_b", '"above-mean-age"')])


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    src, out_dir = sys.argv[1], sys.argv[2]
    os.makedirs(out_dir, exist_ok=True)
    adult(src, out_dir)
    german(src, out_dir)
    heart(src, out_dir)
