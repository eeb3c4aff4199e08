"""Seeded synthetic cohort with known ground truth.

Emits MIMIC-shaped CSV tables (diagnoses, patients, stays, admissions,
chart/lab/procedure/input events, notes, note embeddings) where the binary
outcome is drawn from a logistic model over the *realized* first-24h
aggregate features, so downstream coefficient estimates are directly
comparable to the generating values. Also produces a ground-truth table
(true coefficients, informative features, intercept, Bayes AUC from the
true linear predictor).

Ineligible rows (minors, repeat stays, non-matching codes, duplicate
diagnosis rows, implausible measurements, post-discharge deaths) are woven
in deliberately so the cohort and cleaning stages have real work to do.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasiblePrevalence
from .frame import PatientFrame, parse_time, write_csv
from .harmonize import (GCS_ITEMS, LAB_ITEMS, VITAL_ITEMS, LAB_NAMES,
                        VITAL_NAMES, GCS_NAMES)
from .scoring import roc

BASE_TIME = parse_time("2150-01-01 00:00:00")
HOUR = 3600.0
DAY = 86400.0

ARREST_CODES = ("4275", "I462", "I468", "I469", "I46")
NOISE_CODES = ("A419", "K219", "N179", "Z515")

# per-variable (mu, sd, lo, hi, n_events, measurement_sd)
VARIABLE_SPECS = {
    "hr": (88.0, 16.0, 30.0, 190.0, 4, 4.0),
    "sbp": (118.0, 20.0, 60.0, 240.0, 4, 6.0),
    "dbp": (62.0, 13.0, 30.0, 150.0, 4, 4.0),
    "mbp": None,  # derived from sbp/dbp latents
    "rr": (19.0, 5.0, 6.0, 50.0, 4, 1.5),
    "bt": (98.2, 1.3, 89.0, 108.0, 4, 0.4),
    "spo2": (96.0, 2.5, 70.0, 100.0, 4, 1.0),
    "hematocrit": (33.0, 5.5, 14.0, 60.0, 2, 1.0),
    "hemoglobin": (10.8, 2.0, 4.0, 20.0, 2, 0.3),
    "platelet": (220.0, 90.0, 20.0, 900.0, 2, 12.0),
    "wbc": (11.5, 5.0, 1.5, 45.0, 2, 0.8),
    "pt": (15.5, 6.0, 9.0, 90.0, 2, 0.6),
    "inr": None,  # derived from pt latent (collinear pair)
    "creatinine": (1.4, 0.9, 0.3, 12.0, 2, 0.1),
    "bun": (28.0, 15.0, 4.0, 180.0, 2, 2.0),
    "glucose": (142.0, 48.0, 45.0, 560.0, 2, 9.0),
    "potassium": (4.2, 0.6, 2.2, 7.5, 2, 0.15),
    "sodium": (139.0, 4.5, 115.0, 165.0, 2, 1.0),
    "calcium": (8.6, 0.8, 5.5, 13.0, 2, 0.2),
    "chloride": (103.0, 5.0, 80.0, 130.0, 2, 1.2),
    "anion_gap": (15.0, 4.0, 4.0, 38.0, 2, 0.8),
    "bicarbonate": (22.0, 4.5, 6.0, 45.0, 2, 1.0),
    "lactate": (3.2, 2.2, 0.4, 18.0, 2, 0.25),
    "ph": (7.33, 0.09, 6.9, 7.65, 2, 0.015),
    "gcs_eye": (3.1, 0.8, 1.0, 4.0, 3, 0.3),
    "gcs_verbal": (3.4, 1.1, 1.0, 5.0, 3, 0.3),
    "gcs_motor": (4.6, 1.2, 1.0, 6.0, 3, 0.3),
}

ITEMID_OF = {}
for _item, _name in {**VITAL_ITEMS, **GCS_ITEMS}.items():
    if _name not in ITEMID_OF and _name != "bt_c":
        ITEMID_OF[_name] = _item
for _item, _name in LAB_ITEMS.items():
    ITEMID_OF.setdefault(_name, _item)

DEFAULT_TRUE_BETA = {
    "lactate_mean": 0.85, "gcs_total": -0.70, "anchor_age": 0.45,
    "hr_mean": 0.45, "bt_mean": -0.50, "spo2_mean": -0.40,
    "bun_mean": 0.35, "wbc_mean": 0.25, "ph_mean": -0.30,
    "hemoglobin_mean": -0.25, "copd": 0.20, "heart_failure": -0.20,
}

DEFAULT_MISSING_RATES = {
    "bt": 0.133, "lactate": 0.19, "ph": 0.176, "pt": 0.109, "inr": 0.108,
    "hr": 0.003, "sbp": 0.015, "dbp": 0.017, "mbp": 0.017, "rr": 0.006,
    "spo2": 0.016, "hematocrit": 0.046, "hemoglobin": 0.048,
    "platelet": 0.051, "wbc": 0.054, "creatinine": 0.044, "bun": 0.046,
    "glucose": 0.048, "potassium": 0.045, "sodium": 0.042, "calcium": 0.068,
    "chloride": 0.043, "anion_gap": 0.044, "bicarbonate": 0.044,
    "gcs_eye": 0.02, "gcs_verbal": 0.024, "gcs_motor": 0.02,
}

COMORBIDITY_RATES = {
    "hypertension": ("I10", 0.52), "heart_failure": ("I50", 0.31),
    "myocardial_infarction": ("I21", 0.18), "diabetes": ("E11", 0.29),
    "copd": ("J44", 0.16),
}

RISK_TOKENS = (
    "shock arrest hypotension anuric pressors intubated asystole acidosis "
    "sepsis unresponsive coma infarct ischemia hemorrhage dialysis hypoxia "
    "bradycardia oliguria encephalopathy effusion consolidation cardiogenic "
    "multiorgan critical arrhythmia vasopressor deteriorating obtunded "
    "refractory apneic"
).split()

PROTECT_TOKENS = (
    "stable improving extubated alert ambulating tolerating recovering "
    "baseline resolved clear unremarkable normal weaned comfortable "
    "oriented afebrile intact improved satisfactory routine benign mild "
    "minimal patent adequate controlled favorable reassuring unchanged calm"
).split()


@dataclass
class SynthConfig:
    n_patients: int = 2000
    prevalence: float = 0.52
    true_beta: dict = field(default_factory=lambda: dict(DEFAULT_TRUE_BETA))
    text_signal_strength: float = 1.0
    missing_rates: dict = field(default_factory=lambda: dict(DEFAULT_MISSING_RATES))
    note_coverage: dict = field(default_factory=lambda: {"discharge": 0.70, "radiology": 0.71})
    emb_dim: int = 768
    emb_rank: int = 6
    seed: int = 0
    vent_rate: float = 0.597
    epi_rate: float = 0.026
    dopa_rate: float = 0.021
    minor_fraction: float = 0.02
    extra_stay_fraction: float = 0.15
    postdischarge_death_fraction: float = 0.02
    implausible_fraction: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.prevalence < 1.0:
            raise InfeasiblePrevalence(f"prevalence {self.prevalence} not in (0, 1)")
        for k, v in self.missing_rates.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"missing rate for {k} outside [0, 1]")
        for k, v in self.note_coverage.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"note coverage for {k} outside [0, 1]")


def _solve_intercept(signal, target):
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        prev = float(np.mean(1.0 / (1.0 + np.exp(-(mid + signal)))))
        if prev < target:
            lo = mid
        else:
            hi = mid
    b0 = 0.5 * (lo + hi)
    got = float(np.mean(1.0 / (1.0 + np.exp(-(b0 + signal)))))
    if abs(got - target) > 0.05:
        raise InfeasiblePrevalence(
            f"target {target} unreachable (best {got:.3f}); signal swamps intercept")
    return b0


@dataclass
class Simulation:
    cfg: SynthConfig
    subject_id: np.ndarray
    hadm_id: np.ndarray
    stay_id: np.ndarray
    anchor_age: np.ndarray
    intime: np.ndarray
    dischtime: np.ndarray
    deathtime: np.ndarray           # NaN where absent
    y: np.ndarray
    eta: np.ndarray
    features: dict                  # realized aggregates, name -> array
    masked: dict                    # variable -> bool array (stay-level MCAR)
    event_values: dict              # variable -> (n, k) measurement draws
    event_times: dict               # variable -> (n, k) offsets in seconds
    flags: dict
    text_latent: np.ndarray
    note_present: dict
    truth: dict


def simulate(cfg):
    """Draw the cohort and everything derived from it (no file output)."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_patients

    subject_id = 10_000 + np.arange(n)
    hadm_id = 20_000_000 + np.arange(n)
    stay_id = 30_000_000 + np.arange(n)
    anchor_age = np.clip(np.round(rng.normal(66, 15, n)), 18, 98)
    intime = BASE_TIME + np.arange(n) * 37 * HOUR + np.round(rng.uniform(0, HOUR, n))
    los = rng.uniform(2 * DAY, 20 * DAY, n)
    dischtime = np.round(intime + los)

    # latent per-stay levels, then measurement draws around them
    latents = {}
    for name, spec in VARIABLE_SPECS.items():
        if spec is None:
            continue
        mu, sd, lo, hi, _, _ = spec
        latents[name] = np.clip(rng.normal(mu, sd, n), lo, hi)
    latents["mbp"] = np.clip(
        (latents["sbp"] + 2.0 * latents["dbp"]) / 3.0 + rng.normal(0, 2.0, n),
        40.0, 180.0)
    latents["inr"] = np.clip(0.088 * latents["pt"] + rng.normal(0, 0.02, n), 0.8, 12.0)

    specs = dict(VARIABLE_SPECS)
    specs["mbp"] = (None, None, 40.0, 180.0, 4, 3.0)
    specs["inr"] = (None, None, 0.8, 12.0, 2, 0.02)

    event_values, event_times, features = {}, {}, {}
    for name in specs:
        _, _, lo, hi, k, meas_sd = specs[name]
        vals = np.clip(latents[name][:, None] + rng.normal(0, meas_sd, (n, k)), lo, hi)
        offs = np.sort(np.round(rng.uniform(0.2 * HOUR, 23.8 * HOUR, (n, k))), axis=1)
        event_values[name] = vals
        event_times[name] = offs
        features[f"{name}_mean"] = vals.mean(axis=1)
        features[f"{name}_min"] = vals.min(axis=1)
        features[f"{name}_max"] = vals.max(axis=1)
    features["gcs_total"] = (features["gcs_eye_mean"] + features["gcs_verbal_mean"]
                             + features["gcs_motor_mean"])
    features["anchor_age"] = anchor_age.astype(float)

    flags = {}
    for name, (_, rate) in COMORBIDITY_RATES.items():
        flags[name] = (rng.uniform(size=n) < rate).astype(float)
    flags["received_ventilation"] = (rng.uniform(size=n) < cfg.vent_rate).astype(float)
    flags["epinephrine"] = (rng.uniform(size=n) < cfg.epi_rate).astype(float)
    flags["dopamine"] = (rng.uniform(size=n) < cfg.dopa_rate).astype(float)
    for name, arr in flags.items():
        features[name] = arr

    # linear predictor over standardized realized features + text latent
    signal = np.zeros(n)
    zstats = {}
    for name in sorted(cfg.true_beta):
        beta = cfg.true_beta[name]
        col = features[name]
        mu, sd = float(col.mean()), float(col.std())
        sd = sd if sd > 1e-12 else 1.0
        zstats[name] = (mu, sd)
        signal += beta * (col - mu) / sd
    text_latent = rng.standard_normal(n)
    signal = signal + cfg.text_signal_strength * text_latent

    b0 = _solve_intercept(signal, cfg.prevalence)
    eta = b0 + signal
    y = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)

    death = np.full(n, np.nan)
    for i in range(n):
        if y[i] == 1.0:
            death[i] = intime[i] + rng.uniform(DAY, max(DAY * 1.5, dischtime[i] - intime[i]))
            death[i] = min(round(death[i]), dischtime[i])
        elif rng.uniform() < cfg.postdischarge_death_fraction:
            death[i] = round(dischtime[i] + rng.uniform(DAY, 30 * DAY))

    masked = {}
    for name in specs:
        rate = cfg.missing_rates.get(name, 0.0)
        masked[name] = rng.uniform(size=n) < rate

    note_present = {}
    for kind in ("discharge", "radiology"):
        note_present[kind] = rng.uniform(size=n) < cfg.note_coverage.get(kind, 0.0)

    bayes_auc = roc(eta, y).auc
    truth = {
        "beta": dict(cfg.true_beta),
        "zstats": zstats,
        "intercept": b0,
        "prevalence_target": cfg.prevalence,
        "prevalence_real": float(y.mean()),
        "bayes_auc": bayes_auc,
        "text_signal_strength": cfg.text_signal_strength,
        "informative": sorted([k for k, v in cfg.true_beta.items() if v != 0.0]),
    }
    return Simulation(cfg, subject_id, hadm_id, stay_id, anchor_age, intime,
                      dischtime, death, y, eta, features, masked, event_values,
                      event_times, flags, text_latent, note_present, truth)


def features_frame(sim):
    """The structured feature frame the pipeline would produce, with MCAR masks."""
    n = len(sim.y)
    cols = [
        ("subject_id", "int", sim.subject_id.astype(float)),
        ("hadm_id", "int", sim.hadm_id.astype(float)),
        ("stay_id", "int", sim.stay_id.astype(float)),
        ("anchor_age", "num", sim.features["anchor_age"]),
        ("in_hospital_death", "int", sim.y),
    ]
    gcs_missing = np.zeros(n, dtype=bool)
    for g in GCS_NAMES:
        gcs_missing |= sim.masked[g]
    for name in sorted(sim.event_values):
        m = sim.masked[name]
        stats = ("mean",) if name in GCS_NAMES else ("mean", "min", "max")
        for stat in stats:
            vals = sim.features[f"{name}_{stat}"].copy()
            vals[m] = np.nan
            cols.append((f"{name}_{stat}", "num", vals, m.copy()))
    total = sim.features["gcs_total"].copy()
    total[gcs_missing] = np.nan
    cols.append(("gcs_total", "num", total, gcs_missing.copy()))
    for name in sim.flags:
        cols.append((name, "int", sim.flags[name]))
    return PatientFrame.from_columns(cols)


# --- note rendering ---


def _filler_pool(rng, count, tag):
    letters = np.array(list("abcdefghijklmnopqrstuvwxyz"))
    pool = []
    seen = set()
    while len(pool) < count:
        word = tag + "".join(rng.choice(letters, size=5))
        if word not in seen:
            seen.add(word)
            pool.append(word)
    return pool


def _render_note(rng, latent, filler):
    length = 35 + int(rng.poisson(45))
    p_risk = 0.30 / (1.0 + math.exp(-1.8 * latent))
    p_prot = 0.30 / (1.0 + math.exp(1.8 * latent))
    tokens = []
    for _ in range(length):
        u = rng.uniform()
        if u < p_risk:
            tokens.append(RISK_TOKENS[int(rng.integers(len(RISK_TOKENS)))])
        elif u < p_risk + p_prot:
            tokens.append(PROTECT_TOKENS[int(rng.integers(len(PROTECT_TOKENS)))])
        else:
            tokens.append(filler[int(rng.integers(len(filler)))])
        if rng.uniform() < 0.08:
            tokens.append("the")
        if rng.uniform() < 0.05:
            tokens.append("___")
        if rng.uniform() < 0.04:
            tokens.append(str(int(rng.integers(100))))
    text = ""
    for i, t in enumerate(tokens):
        text += t
        text += ". " if rng.uniform() < 0.1 else " "
    return text.strip()


def _emb_factors(rng, dim, rank):
    W = rng.standard_normal((dim, max(rank, 2)))
    Q, _ = np.linalg.qr(W)
    return Q.T  # rank x dim orthonormal loadings


# --- CSV emission ---


def _frame_rows(columns):
    return PatientFrame.from_columns(columns)


def generate(cfg, out_dir):
    """Write every input table plus ground_truth.csv; returns the Simulation."""
    sim = simulate(cfg)
    rng = np.random.default_rng(cfg.seed + 999_983)
    n = len(sim.y)
    os.makedirs(out_dir, exist_ok=True)

    # patients (+ a few minors that the age filter must drop)
    n_minor = int(round(cfg.minor_fraction * n))
    minor_subj = 900_000 + np.arange(n_minor)
    minor_hadm = 28_000_000 + np.arange(n_minor)
    minor_stay = 38_000_000 + np.arange(n_minor)
    pat_subj = np.concatenate([sim.subject_id, minor_subj])
    pat_age = np.concatenate([sim.anchor_age, rng.integers(5, 18, n_minor)])
    gender = np.where(rng.uniform(size=len(pat_subj)) < 0.44, "F", "M")
    write_csv(_frame_rows([
        ("subject_id", "int", pat_subj.astype(float)),
        ("anchor_age", "int", pat_age.astype(float)),
        ("gender", "str", list(gender)),
    ]), os.path.join(out_dir, "patients.csv"))

    # diagnoses: arrest codes (with duplicates), comorbidity codes, noise codes
    d_subj, d_hadm, d_code, d_seq = [], [], [], []

    def diag(s, h, code, seq=1):
        d_subj.append(float(s)); d_hadm.append(float(h))
        d_code.append(code); d_seq.append(float(seq))

    arrest_choice = rng.integers(0, len(ARREST_CODES), n)
    dup_rows = rng.uniform(size=n) < 0.05
    for i in range(n):
        diag(sim.subject_id[i], sim.hadm_id[i], ARREST_CODES[arrest_choice[i]])
        if dup_rows[i]:
            diag(sim.subject_id[i], sim.hadm_id[i], ARREST_CODES[(arrest_choice[i] + 1) % 4], 2)
        seq = 3
        for name, (code, _) in COMORBIDITY_RATES.items():
            if sim.flags[name][i] == 1.0:
                diag(sim.subject_id[i], sim.hadm_id[i], code + "9", seq)
                seq += 1
        if rng.uniform() < 0.3:
            diag(sim.subject_id[i], sim.hadm_id[i],
                 NOISE_CODES[int(rng.integers(len(NOISE_CODES)))], seq)
    for j in range(n_minor):
        diag(minor_subj[j], minor_hadm[j], ARREST_CODES[int(rng.integers(4))])
    write_csv(_frame_rows([
        ("subject_id", "int", np.array(d_subj)),
        ("hadm_id", "int", np.array(d_hadm)),
        ("seq_num", "int", np.array(d_seq)),
        ("icd_code", "str", d_code),
    ]), os.path.join(out_dir, "diagnoses_icd.csv"))

    # icustays: the index stay, later repeat stays, and minor stays
    s_subj = list(sim.subject_id.astype(float))
    s_hadm = list(sim.hadm_id.astype(float))
    s_stay = list(sim.stay_id.astype(float))
    s_in = list(sim.intime)
    s_out = list(np.minimum(sim.intime + 3 * DAY, sim.dischtime))
    extra = rng.uniform(size=n) < cfg.extra_stay_fraction
    for i in np.flatnonzero(extra):
        s_subj.append(float(sim.subject_id[i]))
        s_hadm.append(float(sim.hadm_id[i]))
        s_stay.append(float(40_000_000 + i))
        later = sim.intime[i] + rng.uniform(35, 60) * DAY
        s_in.append(round(later))
        s_out.append(round(later + DAY))
    for j in range(n_minor):
        s_subj.append(float(minor_subj[j]))
        s_hadm.append(float(minor_hadm[j]))
        s_stay.append(float(minor_stay[j]))
        t = BASE_TIME + rng.uniform(0, 300) * DAY
        s_in.append(round(t))
        s_out.append(round(t + DAY))
    write_csv(_frame_rows([
        ("subject_id", "int", np.array(s_subj)),
        ("hadm_id", "int", np.array(s_hadm)),
        ("stay_id", "int", np.array(s_stay)),
        ("intime", "time", np.array(s_in)),
        ("outtime", "time", np.array(s_out)),
    ]), os.path.join(out_dir, "icustays.csv"))

    # admissions
    a_subj = np.concatenate([sim.subject_id, minor_subj]).astype(float)
    a_hadm = np.concatenate([sim.hadm_id, minor_hadm]).astype(float)
    a_admit = np.concatenate([sim.intime - 6 * HOUR, np.full(n_minor, BASE_TIME)])
    a_disch = np.concatenate([sim.dischtime, np.full(n_minor, BASE_TIME + 2 * DAY)])
    a_death = np.concatenate([sim.deathtime, np.full(n_minor, np.nan)])
    write_csv(_frame_rows([
        ("subject_id", "int", a_subj),
        ("hadm_id", "int", a_hadm),
        ("admittime", "time", a_admit),
        ("dischtime", "time", a_disch),
        ("deathtime", "time", a_death, np.isnan(a_death)),
    ]), os.path.join(out_dir, "admissions.csv"))

    _write_events(sim, rng, out_dir)
    _write_notes(sim, rng, out_dir)

    truth_rows = [("meta", "intercept", sim.truth["intercept"]),
                  ("meta", "prevalence_target", sim.truth["prevalence_target"]),
                  ("meta", "prevalence_real", sim.truth["prevalence_real"]),
                  ("meta", "bayes_auc", sim.truth["bayes_auc"]),
                  ("meta", "text_signal_strength", sim.truth["text_signal_strength"]),
                  ("meta", "seed", float(cfg.seed))]
    for name in sorted(sim.truth["beta"]):
        truth_rows.append(("beta", name, sim.truth["beta"][name]))
    for name in sim.truth["informative"]:
        truth_rows.append(("informative", name, 1.0))
    write_csv(_frame_rows([
        ("kind", "str", [r[0] for r in truth_rows]),
        ("name", "str", [r[1] for r in truth_rows]),
        ("value", "num", np.array([r[2] for r in truth_rows])),
    ]), os.path.join(out_dir, "ground_truth.csv"))
    return sim


def _write_events(sim, rng, out_dir):
    cfg = sim.cfg
    n = len(sim.y)
    vital_set = set(VITAL_NAMES) | set(GCS_NAMES)

    c_subj, c_hadm, c_stay, c_time, c_item, c_val, c_uom = [], [], [], [], [], [], []
    l_subj, l_hadm, l_time, l_item, l_val = [], [], [], [], []

    for name in sorted(sim.event_values):
        vals = sim.event_values[name]
        offs = sim.event_times[name]
        masked = sim.masked[name]
        item = ITEMID_OF[name]
        is_vital = name in vital_set
        celsius_item = 223762
        for i in range(n):
            if masked[i]:
                continue
            for k in range(vals.shape[1]):
                t = sim.intime[i] + offs[i, k]
                v = float(vals[i, k])
                if is_vital:
                    itemid, uom = item, ""
                    if name == "bt" and (i + k) % 3 == 0:
                        # a third of temperature rows arrive in Celsius
                        itemid = celsius_item
                        v = (v - 32.0) * 5.0 / 9.0
                        uom = "C"
                    elif name == "bt":
                        uom = "F"
                    c_subj.append(float(sim.subject_id[i]))
                    c_hadm.append(float(sim.hadm_id[i]))
                    c_stay.append(float(sim.stay_id[i]))
                    c_time.append(t)
                    c_item.append(float(itemid))
                    c_val.append(v)
                    c_uom.append(uom)
                else:
                    l_subj.append(float(sim.subject_id[i]))
                    l_hadm.append(float(sim.hadm_id[i]))
                    l_time.append(t)
                    l_item.append(float(item))
                    l_val.append(v)

    # out-of-window and implausible rows the pipeline must ignore
    n_extra = max(1, int(0.02 * n))
    pick = rng.integers(0, n, n_extra)
    for i in pick:
        c_subj.append(float(sim.subject_id[i]))
        c_hadm.append(float(sim.hadm_id[i]))
        c_stay.append(float(sim.stay_id[i]))
        c_time.append(sim.intime[i] + 24 * HOUR + rng.uniform(0.5, 6) * HOUR)
        c_item.append(float(ITEMID_OF["hr"]))
        c_val.append(float(rng.uniform(60, 120)))
        c_uom.append("")
    n_bad = max(1, int(cfg.implausible_fraction * n))
    bad_specs = [("wbc", 0.3), ("glucose", 700.0), ("lactate", 25.0), ("hr", 400.0)]
    for j, i in enumerate(rng.integers(0, n, n_bad)):
        name, bad_val = bad_specs[j % len(bad_specs)]
        if name == "hr":
            c_subj.append(float(sim.subject_id[i]))
            c_hadm.append(float(sim.hadm_id[i]))
            c_stay.append(float(sim.stay_id[i]))
            c_time.append(sim.intime[i] + rng.uniform(1, 23) * HOUR)
            c_item.append(float(ITEMID_OF[name]))
            c_val.append(bad_val)
            c_uom.append("")
        else:
            l_subj.append(float(sim.subject_id[i]))
            l_hadm.append(float(sim.hadm_id[i]))
            l_time.append(sim.intime[i] + rng.uniform(1, 23) * HOUR)
            l_item.append(float(ITEMID_OF[name]))
            l_val.append(bad_val)

    write_csv(_frame_rows([
        ("subject_id", "int", np.array(c_subj)),
        ("hadm_id", "int", np.array(c_hadm)),
        ("stay_id", "int", np.array(c_stay)),
        ("charttime", "time", np.array(c_time)),
        ("itemid", "int", np.array(c_item)),
        ("valuenum", "num", np.array(c_val)),
        ("valueuom", "str", c_uom),
    ]), os.path.join(out_dir, "chartevents.csv"))
    write_csv(_frame_rows([
        ("subject_id", "int", np.array(l_subj)),
        ("hadm_id", "int", np.array(l_hadm)),
        ("charttime", "time", np.array(l_time)),
        ("itemid", "int", np.array(l_item)),
        ("valuenum", "num", np.array(l_val)),
    ]), os.path.join(out_dir, "labevents.csv"))

    p_subj, p_hadm, p_stay, p_time, p_item = [], [], [], [], []
    i_subj, i_hadm, i_stay, i_time, i_item = [], [], [], [], []
    for i in range(n):
        if sim.flags["received_ventilation"][i] == 1.0:
            p_subj.append(float(sim.subject_id[i]))
            p_hadm.append(float(sim.hadm_id[i]))
            p_stay.append(float(sim.stay_id[i]))
            p_time.append(sim.intime[i] + rng.uniform(0.5, 20) * HOUR)
            p_item.append(225792.0)
        for flag, item in (("epinephrine", 221289.0), ("dopamine", 221662.0)):
            if sim.flags[flag][i] == 1.0:
                i_subj.append(float(sim.subject_id[i]))
                i_hadm.append(float(sim.hadm_id[i]))
                i_stay.append(float(sim.stay_id[i]))
                i_time.append(sim.intime[i] + rng.uniform(0.5, 20) * HOUR)
                i_item.append(item)
    write_csv(_frame_rows([
        ("subject_id", "int", np.array(p_subj)),
        ("hadm_id", "int", np.array(p_hadm)),
        ("stay_id", "int", np.array(p_stay)),
        ("starttime", "time", np.array(p_time)),
        ("itemid", "int", np.array(p_item)),
    ]), os.path.join(out_dir, "procedureevents.csv"))
    write_csv(_frame_rows([
        ("subject_id", "int", np.array(i_subj)),
        ("hadm_id", "int", np.array(i_hadm)),
        ("stay_id", "int", np.array(i_stay)),
        ("starttime", "time", np.array(i_time)),
        ("itemid", "int", np.array(i_item)),
    ]), os.path.join(out_dir, "inputevents.csv"))


def _write_notes(sim, rng, out_dir):
    cfg = sim.cfg
    n = len(sim.y)
    loadings = _emb_factors(np.random.default_rng(cfg.seed + 77), cfg.emb_dim, cfg.emb_rank)
    factor_scale = np.array([3.0] + [2.0 / (1 + k) + 1.0 for k in range(loadings.shape[0] - 1)])

    for kind, filler_tag in (("discharge", "zd"), ("radiology", "zr")):
        present = sim.note_present[kind]
        filler = _filler_pool(rng, 80, filler_tag)
        rows_hadm, rows_subj, rows_time, rows_text = [], [], [], []
        emb_hadm, emb_rows = [], []
        for i in range(n):
            if not present[i]:
                continue
            t = sim.dischtime[i] - HOUR if kind == "discharge" else sim.intime[i] + 2 * HOUR
            rows_subj.append(float(sim.subject_id[i]))
            rows_hadm.append(float(sim.hadm_id[i]))
            rows_time.append(round(t))
            rows_text.append(_render_note(rng, sim.text_latent[i], filler))
            if kind == "radiology" and rng.uniform() < 0.4:
                # later duplicate report; selection must keep the earliest
                rows_subj.append(float(sim.subject_id[i]))
                rows_hadm.append(float(sim.hadm_id[i]))
                rows_time.append(round(t + rng.uniform(2, 30) * HOUR))
                rows_text.append(_render_note(rng, sim.text_latent[i], filler))
            factors = np.concatenate([[sim.text_latent[i]],
                                      rng.standard_normal(loadings.shape[0] - 1)])
            emb = (factors * factor_scale) @ loadings + 0.25 * rng.standard_normal(cfg.emb_dim)
            emb_hadm.append(float(sim.hadm_id[i]))
            emb_rows.append(emb)
        write_csv(_frame_rows([
            ("note_id", "str", [f"{kind[:2]}-{int(h)}-{j}" for j, h in enumerate(rows_hadm)]),
            ("subject_id", "int", np.array(rows_subj)),
            ("hadm_id", "int", np.array(rows_hadm)),
            ("charttime", "time", np.array(rows_time)),
            ("text", "str", rows_text),
        ]), os.path.join(out_dir, f"{kind}.csv"))

        emb_mat = np.vstack(emb_rows) if emb_rows else np.zeros((0, cfg.emb_dim))
        cols = [("hadm_id", "int", np.array(emb_hadm))]
        for d in range(cfg.emb_dim):
            cols.append((f"emb_{d}", "num", emb_mat[:, d] if len(emb_rows) else np.array([])))
        write_csv(_frame_rows(cols), os.path.join(out_dir, f"{kind}_emb.csv"))
