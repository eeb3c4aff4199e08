"""Physiological harmonization of raw event tables.

Turns chart/lab event streams into one patient-level frame: first-24h
windowing, unit alignment (temperature, arterial vs cuff blood pressure),
plausibility masking with per-rule removal counts, mean/min/max
aggregation, GCS totals, and binary comorbidity/treatment flags.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ComponentOutOfRange
from .frame import JoinSpec, PatientFrame, aggregate_by_key, join

WINDOW_SECONDS = 24 * 3600.0

# chartevents itemid -> harmonized vital name ("bt_c" rows carry Celsius)
VITAL_ITEMS = {
    220045: "hr",
    220050: "sbp", 220179: "sbp",
    220051: "dbp", 220180: "dbp",
    220052: "mbp", 220181: "mbp",
    220210: "rr",
    223761: "bt", 223762: "bt_c",
    220277: "spo2",
}

GCS_ITEMS = {220739: "gcs_eye", 223900: "gcs_verbal", 223901: "gcs_motor"}

LAB_ITEMS = {
    51221: "hematocrit", 51222: "hemoglobin", 51265: "platelet", 51301: "wbc",
    51274: "pt", 51237: "inr", 50912: "creatinine", 51006: "bun",
    50931: "glucose", 50971: "potassium", 50983: "sodium", 50893: "calcium",
    50902: "chloride", 50868: "anion_gap", 50882: "bicarbonate",
    50813: "lactate", 50820: "ph",
}

VITAL_NAMES = ("hr", "sbp", "dbp", "mbp", "rr", "bt", "spo2")
LAB_NAMES = tuple(sorted(set(LAB_ITEMS.values())))
GCS_NAMES = ("gcs_eye", "gcs_verbal", "gcs_motor")

COMORBIDITY_CODES = {
    "hypertension": ("401", "I10"),
    "heart_failure": ("428", "I50"),
    "myocardial_infarction": ("410", "I21"),
    "diabetes": ("250", "E11"),
    "copd": ("496", "J44"),
}

VENTILATION_ITEMS = frozenset({225792, 225794})
EPINEPHRINE_ITEMS = frozenset({221289})
DOPAMINE_ITEMS = frozenset({221662})

FLAG_NAMES = tuple(COMORBIDITY_CODES) + ("received_ventilation", "epinephrine", "dopamine")


@dataclass(frozen=True)
class PlausibilityRule:
    variable: str
    lower: float
    upper: float
    unit: str = ""

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"{self.variable}: lower must be < upper")


# Only three bounds are dictated by the source data conventions (wbc, glucose,
# lactate); the rest are deliberately wide so they only catch unit errors and
# typos. The applied table is exported with every run for auditability.
DEFAULT_PLAUSIBILITY = (
    PlausibilityRule("hr", 20, 300, "bpm"),
    PlausibilityRule("sbp", 40, 300, "mmHg"),
    PlausibilityRule("dbp", 20, 200, "mmHg"),
    PlausibilityRule("mbp", 30, 250, "mmHg"),
    PlausibilityRule("rr", 4, 60, "/min"),
    PlausibilityRule("bt", 77, 113, "F"),
    PlausibilityRule("spo2", 50, 100, "%"),
    PlausibilityRule("wbc", 1, 50, "K/uL"),
    PlausibilityRule("glucose", 10, 600, "mg/dL"),
    PlausibilityRule("lactate", 0.1, 20, "mmol/L"),
    PlausibilityRule("ph", 6.5, 8.0, ""),
    PlausibilityRule("hematocrit", 10, 70, "%"),
    PlausibilityRule("hemoglobin", 2, 25, "g/dL"),
    PlausibilityRule("platelet", 5, 2000, "K/uL"),
    PlausibilityRule("pt", 5, 150, "s"),
    PlausibilityRule("inr", 0.2, 20, ""),
    PlausibilityRule("creatinine", 0.1, 40, "mg/dL"),
    PlausibilityRule("bun", 1, 300, "mg/dL"),
    PlausibilityRule("potassium", 1, 12, "mEq/L"),
    PlausibilityRule("sodium", 90, 200, "mEq/L"),
    PlausibilityRule("calcium", 2, 20, "mg/dL"),
    PlausibilityRule("chloride", 50, 175, "mEq/L"),
    PlausibilityRule("anion_gap", 1, 60, "mEq/L"),
    PlausibilityRule("bicarbonate", 2, 60, "mEq/L"),
    PlausibilityRule("gcs_eye", 1, 4, ""),
    PlausibilityRule("gcs_verbal", 1, 5, ""),
    PlausibilityRule("gcs_motor", 1, 6, ""),
)


def convert_temperature(value, unit):
    """Celsius -> Fahrenheit; Fahrenheit passes through unchanged."""
    v = np.asarray(value, dtype=float)
    if unit == "C":
        out = v * 9.0 / 5.0 + 32.0
    elif unit == "F":
        out = v.copy() if v.ndim else v
    else:
        raise ValueError(f"unknown temperature unit {unit!r}")
    return float(out) if np.ndim(value) == 0 else out


def fahrenheit_to_celsius(value):
    v = np.asarray(value, dtype=float)
    out = (v - 32.0) * 5.0 / 9.0
    return float(out) if np.ndim(value) == 0 else out


def detect_celsius(value):
    """Heuristic for unlabeled temperatures: the scales do not overlap below 50."""
    return value < 50.0


def mean_bp(sbp, dbp):
    """(SBP + 2*DBP) / 3; the standard arterial mean estimate."""
    return (np.asarray(sbp, dtype=float) + 2.0 * np.asarray(dbp, dtype=float)) / 3.0


def window_24h(events, stays, *, key="stay_id", time_column="charttime"):
    """Keep events with intime <= charttime < intime + 24h.

    Events whose key has no stay are unlinked: dropped and counted. Returns
    (frame, dropped_unlinked_count).
    """
    linked = join(events, stays.select([key, "intime"]), JoinSpec((key,), "left"))
    it, imask = linked.column("intime")
    ct, cmask = linked.column(time_column)
    unlinked = int(imask.sum())
    ok = (~imask) & (~cmask) & (ct >= it) & (ct < it + WINDOW_SECONDS)
    return linked.filter(ok).drop(["intime"]), unlinked


def apply_plausibility(frame, rules):
    """Mask out-of-range cells (rows survive); returns (frame, per-rule counts)."""
    out = frame
    counts = {}
    for rule in rules:
        if not out.has_column(rule.variable):
            continue
        vals, mask = out.column(rule.variable)
        bad = (~mask) & ((vals < rule.lower) | (vals > rule.upper))
        counts[rule.variable] = int(bad.sum())
        if bad.any():
            out = out.with_column(rule.variable, out.kind(rule.variable), vals, mask | bad)
    return out, counts


def gcs_total(eye, verbal, motor):
    """Sum of component means; components validated against their ranges."""
    e = np.asarray(eye, dtype=float)
    v = np.asarray(verbal, dtype=float)
    m = np.asarray(motor, dtype=float)
    for arr, lo, hi, name in ((e, 1, 4, "eye"), (v, 1, 5, "verbal"), (m, 1, 6, "motor")):
        finite = arr[np.isfinite(arr)]
        if finite.size and ((finite < lo).any() or (finite > hi).any()):
            raise ComponentOutOfRange(f"gcs {name} outside [{lo},{hi}]")
    out = e + v + m
    return float(out) if np.ndim(eye) == 0 else out


def _events_to_variables(chartevents):
    """Map itemids to harmonized names; align temperature to Fahrenheit."""
    item, imask = chartevents.column("itemid")
    val, vmask = chartevents.column("valuenum")
    uom = chartevents.values("valueuom") if chartevents.has_column("valueuom") else None
    names = np.array([""] * chartevents.n_rows, dtype=object)
    out_vals = val.copy()
    keep = np.zeros(chartevents.n_rows, dtype=bool)
    for r in range(chartevents.n_rows):
        if imask[r] or vmask[r]:
            continue
        code = int(item[r])
        var = VITAL_ITEMS.get(code) or GCS_ITEMS.get(code)
        if var is None:
            continue
        v = float(val[r])
        if var == "bt_c":
            var, v = "bt", convert_temperature(v, "C")
        elif var == "bt":
            unit = str(uom[r]).strip().upper() if uom is not None else ""
            if unit in ("C", "°C", "CELSIUS") or (unit == "" and detect_celsius(v)):
                v = convert_temperature(v, "C")
        names[r] = var
        out_vals[r] = v
        keep[r] = True
    out = chartevents.with_column("variable", "str", names)
    out = out.with_column("valuenum", "num", out_vals, vmask)
    return out.filter(keep)


def _pool_duplicate_measurements(events, key):
    """Average simultaneous readings of one variable (arterial + cuff BP)."""
    seen = {}
    kvals = events.values(key)
    tvals = events.values("charttime")
    var = events.values("variable")
    val = events.values("valuenum")
    for r in range(events.n_rows):
        k = (int(kvals[r]), str(var[r]), float(tvals[r]))
        seen.setdefault(k, []).append(float(val[r]))
    rows = sorted(seen)
    pooled = [float(np.mean(seen[k])) for k in rows]
    return PatientFrame.from_columns([
        (key, "int", np.array([k[0] for k in rows], dtype=float)),
        ("variable", "str", [k[1] for k in rows]),
        ("charttime", "time", np.array([k[2] for k in rows], dtype=float)),
        ("valuenum", "num", np.array(pooled)),
    ])


def aggregate_variables(events, key, variables, stats=("mean", "min", "max")):
    """Per-key mean/min/max of each long-format variable; wide output frame."""
    keys = sorted({int(k) for k in events.values(key)})
    base = PatientFrame.from_columns([(key, "int", np.array(keys, dtype=float))])
    var = events.values("variable")
    for name in variables:
        sub = events.filter(np.array([v == name for v in var], dtype=bool))
        if sub.n_rows == 0:
            for stat in stats:
                base = base.with_column(f"{name}_{stat}", "num",
                                        np.full(base.n_rows, np.nan))
            continue
        agg = aggregate_by_key(sub, key, list(stats), columns=["valuenum"])
        agg = agg.rename({f"valuenum_{s}": f"{name}_{s}" for s in stats})
        base = join(base, agg, JoinSpec((key,), "left"))
    return base


def derive_mbp(frame):
    """Fill masked MBP aggregates from SBP/DBP via the standard formula."""
    out = frame
    for stat in ("mean", "min", "max"):
        mcol, mmask = out.column(f"mbp_{stat}")
        s, smask = out.column(f"sbp_{stat}")
        d, dmask = out.column(f"dbp_{stat}")
        fill = mmask & (~smask) & (~dmask)
        if fill.any():
            mcol[fill] = mean_bp(s[fill], d[fill])
            out = out.with_column(f"mbp_{stat}", "num", mcol, mmask & ~fill)
    return out


def binary_flags(diagnoses, proc_events, input_events, cohort):
    """Per-stay 0/1 comorbidity and first-24h treatment indicator columns."""
    hadm = cohort.values("hadm_id").astype(int)
    stay = cohort.values("stay_id").astype(int)
    n = cohort.n_rows
    flags = {name: np.zeros(n) for name in FLAG_NAMES}

    hadm_pos = {h: i for i, h in enumerate(hadm.tolist())}
    dh, dhmask = diagnoses.column("hadm_id")
    dc, dcmask = diagnoses.column("icd_code")
    for r in range(diagnoses.n_rows):
        if dhmask[r] or dcmask[r]:
            continue
        i = hadm_pos.get(int(dh[r]))
        if i is None:
            continue
        code = str(dc[r]).strip()
        for name, prefixes in COMORBIDITY_CODES.items():
            if any(code.startswith(p) for p in prefixes):
                flags[name][i] = 1.0

    stay_pos = {s: i for i, s in enumerate(stay.tolist())}

    def mark(events, item_sets):
        if events is None or events.n_rows == 0:
            return
        sv, smask = events.column("stay_id")
        iv, imask = events.column("itemid")
        for r in range(events.n_rows):
            if smask[r] or imask[r]:
                continue
            i = stay_pos.get(int(sv[r]))
            if i is None:
                continue
            code = int(iv[r])
            for name, items in item_sets:
                if code in items:
                    flags[name][i] = 1.0

    mark(proc_events, [("received_ventilation", VENTILATION_ITEMS)])
    mark(input_events, [("epinephrine", EPINEPHRINE_ITEMS), ("dopamine", DOPAMINE_ITEMS)])

    out = cohort.select(["stay_id"])
    for name in FLAG_NAMES:
        out = out.with_column(name, "int", flags[name])
    return out


def build_structured_features(chartevents, labevents, diagnoses, proc_events,
                              input_events, cohort, rules=DEFAULT_PLAUSIBILITY):
    """Assemble the patient-level structured feature frame.

    Returns (features, report) where report carries unlinked-event and
    per-rule plausibility removal counts.
    """
    report = {"unlinked": {}, "plausibility": {}}

    stays = cohort.select(["stay_id", "intime"])
    chart_w, unlinked_chart = window_24h(chartevents, stays, key="stay_id")
    report["unlinked"]["chartevents"] = unlinked_chart
    chart_vars = _events_to_variables(chart_w)
    chart_vars = _pool_duplicate_measurements(chart_vars, "stay_id")
    chart_vars, chart_counts = _apply_rules_long(chart_vars, rules)

    lab_stays = cohort.select(["hadm_id", "intime"])
    labs_w, unlinked_labs = window_24h(labevents, lab_stays, key="hadm_id")
    report["unlinked"]["labevents"] = unlinked_labs
    item = labs_w.values("itemid")
    lab_names = np.array([LAB_ITEMS.get(int(i), "") for i in item], dtype=object)
    labs_long = labs_w.with_column("variable", "str", lab_names)
    labs_long = labs_long.filter(np.array([n != "" for n in lab_names], dtype=bool))
    labs_long, lab_counts = _apply_rules_long(labs_long, rules)

    report["plausibility"] = _merge_counts(chart_counts, lab_counts)

    vital_agg = aggregate_variables(chart_vars, "stay_id", VITAL_NAMES + GCS_NAMES)
    vital_agg = derive_mbp(vital_agg)
    lab_agg = aggregate_variables(labs_long, "hadm_id", LAB_NAMES)

    flags = binary_flags(diagnoses, proc_events, input_events, cohort)

    out = cohort.select(["subject_id", "hadm_id", "stay_id", "anchor_age", "in_hospital_death"])
    out = join(out, vital_agg, JoinSpec(("stay_id",), "left"))
    out = join(out, lab_agg, JoinSpec(("hadm_id",), "left"))
    out = join(out, flags, JoinSpec(("stay_id",), "left"))

    eye, eyem = out.column("gcs_eye_mean")
    ver, verm = out.column("gcs_verbal_mean")
    mot, motm = out.column("gcs_motor_mean")
    any_missing = eyem | verm | motm
    total = np.full(out.n_rows, np.nan)
    live = ~any_missing
    if live.any():
        total[live] = gcs_total(eye[live], ver[live], mot[live])
    out = out.with_column("gcs_total", "num", total, any_missing)
    drop = [f"{g}_{s}" for g in GCS_NAMES for s in ("min", "max")]
    out = out.drop(drop)
    return out, report


def _apply_rules_long(events, rules):
    """Plausibility masking for long-format (variable, valuenum) events."""
    by_var = {r.variable: r for r in rules}
    var = events.values("variable")
    vals, mask = events.column("valuenum")
    counts = {}
    newly = np.zeros(events.n_rows, dtype=bool)
    for r in range(events.n_rows):
        rule = by_var.get(str(var[r]))
        if rule is None or mask[r]:
            continue
        v = float(vals[r])
        if v < rule.lower or v > rule.upper:
            newly[r] = True
            counts[rule.variable] = counts.get(rule.variable, 0) + 1
    if newly.any():
        events = events.with_column("valuenum", "num", vals, mask | newly)
    return events, counts


def _merge_counts(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + v
    return out
