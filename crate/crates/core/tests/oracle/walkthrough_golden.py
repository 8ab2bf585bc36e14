#!/usr/bin/env python3
# SPDX-License-Identifier: MIT OR Apache-2.0
"""Independent oracle for the API walkthrough golden file.

Recomputes every response of the fixture session (create -> components ->
steer -> dose_response -> impact -> reset) with numpy from the raw fixture
numbers in tests/common/mod.rs. Values are rounded through float32 first,
exactly as the EMB1/SAE1 files store them.

Usage: python3 walkthrough_golden.py > ../golden/walkthrough.json
"""
import json

import numpy as np


def f32(a):
    return np.array(a, dtype=np.float32).astype(np.float64)


TAU = 100.0
K = 3
ENC = f32(np.vstack([np.eye(4), np.zeros((1, 4))]))
ENC_BIAS = f32([0, 0, 0, 0, -0.1])
DEC = f32([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [0.6, 0.8, 0, 0]])
DEC_BIAS = f32([0, 0.1, 0, 0])
CLASSES = ["melanoma", "nevus"]
T = f32([[1.0, 0.2, 0.0, 0.1], [0.0, 0.2, 1.0, 0.1]])

INSPECT = f32([[0.6, 0.5, 0.9, 0.1], [0.9, 0.3, 0.1, 0.0], [0.1, 0.4, 0.8, 0.2], [-0.2, 0.3, 0.7, 0.5]])
INSPECT_LABELS = ["melanoma", "melanoma", "nevus", "nevus"]
REFERENCE = f32([
    [0.9, 0.1, 0.0, 0.0], [0.8, 0.2, 0.1, 0.0], [0.1, 0.9, 0.0, 0.1], [0.0, 0.7, 0.1, 0.0],
    [0.0, 0.1, 0.95, 0.0], [0.1, 0.0, 0.85, 0.1], [0.0, 0.0, 0.1, 0.9], [0.2, 0.1, 0.0, 0.6],
])
VOCAB = [("", [0.5] * 4), ("irregular pigment", [1, 0, 0, 0]), ("skin tone", [0, 1, 0, 0]),
         ("text marking", [0, 0, 1, 0]), ("ruler", [0, 0, 0, 1])]
EVAL = f32([
    [0.7, 0.2, 0.1, 0.0], [0.6, 0.3, 0.8, 0.0], [0.8, 0.1, 0.0, 0.2], [0.5, 0.4, 0.6, 0.1],
    [0.9, 0.2, 0.3, 0.1], [0.1, 0.3, 0.9, 0.1], [0.0, 0.2, 0.7, 0.3], [0.2, 0.1, 0.6, 0.0],
    [0.3, 0.2, 0.5, 0.2], [0.1, 0.5, 0.4, 0.0],
])
EVAL_LABELS = [0] * 5 + [1] * 5


def acts(x):
    return np.maximum(0.0, ENC @ (x - DEC_BIAS) + ENC_BIAS)


def steered(x, steering):
    a = acts(x)
    resid = x - (DEC.T @ a + DEC_BIAS)
    a2 = a.copy()
    for j, m in steering.items():
        a2[j] = a[j] * (1 + m)
    return a2, DEC.T @ a2 + DEC_BIAS + resid


def predict(x, steering):
    _, xs = steered(x, steering)
    logits = TAU * (T @ xs) / (np.linalg.norm(xs) * np.linalg.norm(T, axis=1))
    e = np.exp(logits - logits.max())
    p = e / e.sum()
    i = int(np.argmax(logits))
    return {"classes": CLASSES, "logits": logits.tolist(), "probabilities": p.tolist(),
            "predicted": CLASSES[i], "predicted_index": i, "score_mode": "cosine",
            "logit_scale": TAU}


def cards():
    out = []
    A = np.array([acts(x) for x in REFERENCE])
    empty = f32(VOCAB[0][1])
    for j in range(DEC.shape[0]):
        col = A[:, j]
        order = sorted([i for i in range(len(col)) if col[i] > 0], key=lambda i: (-col[i], i))[:K]
        if not order:
            out.append({"dead": True, "ids": [], "top": None})
            continue
        mean = REFERENCE[order].mean(axis=0)
        cos = lambda t: mean @ t / (np.linalg.norm(mean) * np.linalg.norm(t))
        scores = [(-(cos(f32(e)) - cos(empty)), i, l, cos(f32(e)) - cos(empty))
                  for i, (l, e) in enumerate(VOCAB) if l != ""]
        scores.sort()
        out.append({"dead": False, "ids": [f"ref-{i}" for i in order], "top": (scores[0][2], scores[0][3])})
    return out


def session(history):
    return {"session_id": "s000001", "sample_id": "img-0", "class_set": "lesion",
            "target_class": "nevus",
            "steering": history[-1]["steering"] if history else [], "history": history}


def main():
    x = INSPECT[0]
    steps = []
    steps.append({"method": "GET", "path": "/v1/samples", "status": 200,
                  "body": [{"sample_id": f"img-{i}", "asset_ref": f"inspect/img-{i}.png",
                            "true_label": INSPECT_LABELS[i]} for i in range(4)]})

    base = predict(x, {})
    steps.append({"method": "POST", "path": "/v1/sessions",
                  "request": {"sample_id": "img-0", "class_set": "lesion"}, "status": 200,
                  "body": {"session": session([]), "prediction": base}})

    # Attribution of the predicted (nevus) logit at the unsteered state.
    a, xs = steered(x, {})
    t = T[base["predicted_index"]]
    xn, tn = np.linalg.norm(xs), np.linalg.norm(t)
    g = TAU * (t / (xn * tn) - (xs @ t) * xs / (xn ** 3 * tn))
    R = a * (DEC @ g)
    ranking = sorted([j for j in range(len(a)) if a[j] != 0], key=lambda j: (-abs(R[j]), j))
    cs = cards()
    rows = []
    for rank, j in enumerate(ranking[:3]):
        c = cs[j]
        rows.append({"rank": rank + 1, "component": j, "activation": a[j], "attribution": R[j],
                     "top_label": c["top"][0] if c["top"] else None,
                     "top_label_score": c["top"][1] if c["top"] else None,
                     "dead": c["dead"], "exemplar_ids": c["ids"],
                     "exemplar_asset_refs": [f"ref/{i}.png" for i in c["ids"]]})
    steps.append({"method": "GET", "path": "/v1/sessions/s000001/components?limit=3", "status": 200,
                  "body": {"session_id": "s000001", "target": "nevus",
                           "logit": TAU * (xs @ t) / (xn * tn), "rows": rows}})

    mods = [{"component": 2, "m": -1.0}]
    after = predict(x, {2: -1.0})
    h1 = {"steering": mods, "predicted": after["predicted"],
          "target_probability": after["probabilities"][1]}
    steps.append({"method": "PUT", "path": "/v1/sessions/s000001/steering",
                  "request": {"modifications": mods}, "status": 200,
                  "body": {"session_id": "s000001", "steering": mods, "prediction_before": base,
                           "prediction_after": after,
                           "per_class_deltas": [{"label": CLASSES[c],
                                                 "logit_delta": after["logits"][c] - base["logits"][c],
                                                 "probability_delta": after["probabilities"][c] - base["probabilities"][c]}
                                                for c in range(2)]}})

    grid = [-1.0, -0.5, 0.0, 0.5, 1.0]
    steps.append({"method": "GET", "path": "/v1/sessions/s000001/dose_response?component=2&steps=5",
                  "status": 200,
                  "body": {"session_id": "s000001", "component": 2, "activation": acts(x)[2],
                           "points": [{"m": m, "prediction": predict(x, {2: m})} for m in grid]}})

    before = [predict(e, {}) for e in EVAL]
    aft = [predict(e, {2: -1.0}) for e in EVAL]
    n = len(EVAL)
    per_class = []
    for c in range(2):
        idx = [i for i in range(n) if EVAL_LABELS[i] == c]
        per_class.append({
            "label": CLASSES[c], "support": len(idx),
            "accuracy_before": sum(before[i]["predicted_index"] == c for i in idx) / len(idx),
            "accuracy_after": sum(aft[i]["predicted_index"] == c for i in idx) / len(idx),
            "mean_probability_delta": sum(aft[i]["probabilities"][c] - before[i]["probabilities"][c] for i in range(n)) / n,
        })
    steps.append({"method": "POST", "path": "/v1/sessions/s000001/impact",
                  "request": {"eval_set": "val"}, "status": 200,
                  "body": {"session_id": "s000001", "eval_set": "val", "steering": mods, "samples": n,
                           "accuracy_before": sum(before[i]["predicted_index"] == EVAL_LABELS[i] for i in range(n)) / n,
                           "accuracy_after": sum(aft[i]["predicted_index"] == EVAL_LABELS[i] for i in range(n)) / n,
                           "mean_abs_prob_shift": sum(abs(aft[i]["probabilities"][EVAL_LABELS[i]] - before[i]["probabilities"][EVAL_LABELS[i]]) for i in range(n)) / n,
                           "flipped": sum(aft[i]["predicted_index"] != before[i]["predicted_index"] for i in range(n)),
                           "per_class_deltas": per_class}})

    h2 = {"steering": [], "predicted": base["predicted"], "target_probability": base["probabilities"][1]}
    steps.append({"method": "POST", "path": "/v1/sessions/s000001/reset", "status": 200,
                  "body": {"session": session([h1, h2]), "prediction": base}})

    def plain(o):
        if isinstance(o, dict):
            return {k: plain(v) for k, v in o.items()}
        if isinstance(o, list):
            return [plain(v) for v in o]
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, (np.bool_,)):
            return bool(o)
        if isinstance(o, (np.integer,)):
            return int(o)
        return o

    print(json.dumps({"steps": plain(steps)}, indent=1))


if __name__ == "__main__":
    main()
