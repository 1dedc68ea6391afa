#!/usr/bin/env python3
"""Regenerates the synthetic preference library, its trend manifest and the
malformed library variants under crates/core/fixtures/.

Also reports, for every trend assertion with a reasoning probe, the Monte
Carlo probability that the vote oracle's top-scored widget over k=10 draws
satisfies the assertion. Run from the repository root.
"""

import json
import random
import re
from collections import Counter
from pathlib import Path

OUT = Path("crates/core/fixtures")

WIDGETS = ["slider", "dropdown", "radio_buttons", "text_field",
           "preset_buttons", "color_wheel", "color_picker", "click_on_image"]
CAPS = {
    "slider": {"continuous", "position"},
    "text_field": {"continuous", "position"},
    "dropdown": {"discrete"},
    "radio_buttons": {"discrete"},
    "preset_buttons": {"discrete", "color", "position"},
    "color_wheel": {"color", "continuous"},
    "color_picker": {"color"},
    "click_on_image": {"position"},
}
ASPECTS = ["predictability", "efficiency", "explorability"]

STOP = set("""a an the and or but if of to in on for with by at from as into is are be
was it its this that these those you your me my we our they their them what which who
how so than then most very can will just image""".split())

TASKS = [
    ("image_adjust_lightness",
     "Experiment with lightness settings to see how different levels affect the image.",
     ["continuous", "discrete"]),
    ("image_adjust_saturation",
     "Boost the saturation to make the colors pop.",
     ["continuous", "discrete"]),
    ("image_adjust_hue",
     "Experiment with different hues to find a color tone that complements the overall mood of the image.",
     ["continuous", "discrete", "color"]),
    ("image_adjust_fall_color",
     "Adjust the color settings to gradually shift the image tones, creating a warm, autumnal atmosphere. "
     "Ensure the final image is the one that looks the most autumnal to you.",
     ["color"]),
    ("image_color_match",
     "Change the rocket's color to match the provided reference color. "
     "Ensure the rocket's color in the final image best matches the reference color.",
     ["color"]),
    ("image_adjust_color_balance",
     "Experiment with different color balance settings to see how altering the red, green, and blue "
     "levels affects the overall color harmony of the image.",
     ["color"]),
    ("image_place_watermark",
     "Experiment with different watermark positions to find the perfect balance between visibility and subtlety.",
     ["position", "discrete"]),
    ("image_place_vignette",
     "Darken the background using a vignette effect except for the human face by properly positioning "
     "the circle around the face.",
     ["position", "discrete"]),
]

P, E, X = ASPECTS
COUNTS = {
    "image_adjust_lightness": {
        P: {"preset_buttons": 19, "slider": 6, "dropdown": 2, "radio_buttons": 2, "text_field": 1},
        E: {"preset_buttons": 20, "slider": 5, "dropdown": 2, "radio_buttons": 2, "text_field": 1},
        X: {"slider": 21, "preset_buttons": 5, "text_field": 2, "dropdown": 1, "radio_buttons": 1},
    },
    "image_adjust_saturation": {
        P: {"preset_buttons": 18, "slider": 7, "radio_buttons": 2, "dropdown": 2, "text_field": 1},
        E: {"preset_buttons": 21, "slider": 5, "dropdown": 2, "radio_buttons": 1, "text_field": 1},
        X: {"slider": 21, "preset_buttons": 6, "text_field": 2, "dropdown": 1},
    },
    "image_adjust_hue": {
        P: {"preset_buttons": 17, "color_wheel": 5, "slider": 4, "dropdown": 2, "radio_buttons": 1, "color_picker": 1},
        E: {"preset_buttons": 19, "slider": 4, "color_wheel": 3, "dropdown": 2, "radio_buttons": 1, "color_picker": 1},
        X: {"color_wheel": 24, "slider": 3, "preset_buttons": 2, "color_picker": 1},
    },
    "image_adjust_fall_color": {
        P: {"color_wheel": 14, "color_picker": 9, "preset_buttons": 5, "slider": 2},
        E: {"preset_buttons": 19, "color_wheel": 5, "color_picker": 3, "slider": 2, "dropdown": 1},
        X: {"color_wheel": 17, "color_picker": 9, "slider": 2, "preset_buttons": 2},
    },
    "image_color_match": {
        P: {"text_field": 8, "color_picker": 8, "color_wheel": 7, "preset_buttons": 7},
        E: {"text_field": 17, "color_picker": 6, "color_wheel": 4, "preset_buttons": 3},
        X: {"color_wheel": 16, "color_picker": 10, "text_field": 2, "slider": 2},
    },
    "image_adjust_color_balance": {
        P: {"color_picker": 15, "color_wheel": 9, "preset_buttons": 4, "slider": 2},
        E: {"preset_buttons": 18, "slider": 5, "color_picker": 4, "color_wheel": 3},
        X: {"color_wheel": 17, "color_picker": 9, "slider": 3, "preset_buttons": 1},
    },
    "image_place_watermark": {
        P: {"preset_buttons": 15, "click_on_image": 11, "dropdown": 2, "radio_buttons": 1, "slider": 1},
        E: {"click_on_image": 14, "preset_buttons": 13, "slider": 2, "dropdown": 1},
        X: {"click_on_image": 14, "slider": 11, "preset_buttons": 4, "radio_buttons": 1},
    },
    "image_place_vignette": {
        P: {"click_on_image": 15, "preset_buttons": 11, "slider": 3, "text_field": 1},
        E: {"preset_buttons": 14, "click_on_image": 13, "slider": 2, "text_field": 1},
        X: {"slider": 14, "click_on_image": 13, "preset_buttons": 2, "text_field": 1},
    },
}

REASONS = {
    "slider": [
        "Dragging the handle gives fine-grained control and I can watch the change as I go.",
        "A slider lets me sweep through the whole range quickly and stop where it looks right.",
        "I like seeing the value move smoothly between the limits.",
        "The handle position tells me roughly where I am in the range.",
    ],
    "dropdown": [
        "A short list of fixed values keeps the choice simple.",
        "The menu stays compact and I only pick from known settings.",
        "I know exactly which values are available before choosing.",
    ],
    "radio_buttons": [
        "All options are visible at once, so I can compare them.",
        "One click selects a value and I can see which one is active.",
        "Fixed choices laid out side by side are easy to scan.",
    ],
    "text_field": [
        "Typing the exact number is the most precise way to hit the target.",
        "I can enter the value I want directly without fiddling.",
        "Exact input avoids overshooting the value I need.",
    ],
    "preset_buttons": [
        "The preview on each button shows the result before I click.",
        "One click applies a good setting and the preview tells me what to expect.",
        "Presets with previews are quick and I am never surprised by the result.",
        "I can compare the previews and pick the one I like in a single step.",
    ],
    "color_wheel": [
        "The wheel shows every hue around the circle so I can explore colors freely.",
        "Clicking around the ring lets me try many colors quickly.",
        "I can see how colors relate to each other on the wheel.",
        "Moving around the wheel is a natural way to look for the right tone.",
    ],
    "color_picker": [
        "The picker shows the exact color I am choosing.",
        "I can choose any color and see it in the swatch before applying it.",
        "A picker gives full control over the color with a clear preview.",
    ],
    "click_on_image": [
        "Clicking where I want it on the image is the most direct way to place it.",
        "I can point at the exact spot instead of guessing coordinates.",
        "Direct clicks on the picture make positioning obvious.",
    ],
}

RATERS = [f"p{i:02d}" for i in range(1, 51)]


def content_words(text):
    toks = [t.lower() for t in re.split(r"[^0-9A-Za-z]+", text) if t]
    return {t for t in toks if len(t) > 1 and t not in STOP}


def build_library(seed=20240611):
    rng = random.Random(seed)
    tasks = []
    for name, desc, tags in TASKS:
        responses = {}
        for aspect in ASPECTS:
            counts = COUNTS[name][aspect]
            assert sum(counts.values()) == 30, (name, aspect)
            widgets = [w for w, c in counts.items() for _ in range(c)]
            rng.shuffle(widgets)
            raters = sorted(rng.sample(RATERS, 30))
            lst = []
            for rid, w in zip(raters, widgets):
                lst.append({"rater_id": rid, "widget": w, "reason": rng.choice(REASONS[w])})
            responses[aspect] = lst
        tasks.append({"name": name, "description": desc, "tags": tags, "responses": responses})
    return {"version": "2024.1-synthetic", "tasks": tasks}


def relevance(ctx_desc, ctx_tags, lib):
    cw = content_words(ctx_desc)
    out = []
    for t in lib["tasks"]:
        s = 10 * len(set(ctx_tags) & set(t["tags"])) + len(cw & content_words(t["description"]))
        if s > 0:
            out.append((t, s / 10))
    return out


def votes(ctx_desc, ctx_tags, lib, aspect):
    v = Counter()
    for t, s in relevance(ctx_desc, ctx_tags, lib):
        lst = t["responses"][aspect]
        c = Counter(r["widget"] for r in lst)
        for w, n in c.items():
            if not ctx_tags or CAPS[w] & set(ctx_tags):
                v[w] += s * n / len(lst)
    return v


def top_of_k(v, k, rng):
    ws = sorted(v)
    weights = [v[w] for w in ws]
    draws = Counter(rng.choices(ws, weights, k=k))
    return sorted(draws.items(), key=lambda x: (-x[1], x[0]))


MANIFEST = [
    # continuous value adjustment
    ("image_adjust_lightness", P, "argmax", ["preset_buttons"]),
    ("image_adjust_lightness", E, "argmax", ["preset_buttons"]),
    ("image_adjust_lightness", X, "argmax", ["slider"]),
    ("image_adjust_saturation", P, "argmax", ["preset_buttons"]),
    ("image_adjust_saturation", E, "argmax", ["preset_buttons"]),
    ("image_adjust_saturation", X, "argmax", ["slider"]),
    ("image_adjust_hue", P, "argmax", ["preset_buttons"]),
    ("image_adjust_hue", E, "argmax", ["preset_buttons"]),
    ("image_adjust_hue", X, "argmax", ["color_wheel"]),
    # discrete value selection
    ("image_place_watermark", P, "beats", ["preset_buttons", "radio_buttons", "dropdown"]),
    ("image_place_watermark", E, "beats", ["preset_buttons", "radio_buttons", "dropdown"]),
    ("image_place_watermark", X, "beats", ["preset_buttons", "radio_buttons", "dropdown"]),
    # colour tasks emphasising exploration
    ("image_adjust_fall_color", P, "argmax_in", ["color_wheel", "color_picker"]),
    ("image_adjust_fall_color", E, "argmax", ["preset_buttons"]),
    ("image_adjust_fall_color", X, "argmax_in", ["color_wheel", "color_picker"]),
    ("image_adjust_color_balance", P, "argmax_in", ["color_wheel", "color_picker"]),
    ("image_adjust_color_balance", E, "argmax", ["preset_buttons"]),
    ("image_adjust_color_balance", X, "argmax_in", ["color_wheel", "color_picker"]),
    # precise colour matching
    ("image_color_match", P, "no_consensus", ["text_field", "color_wheel", "color_picker", "preset_buttons"]),
    ("image_color_match", E, "argmax", ["text_field"]),
    ("image_color_match", X, "argmax_in", ["color_wheel", "color_picker"]),
    # position adjustment
    ("image_place_watermark", P, "top_two", ["preset_buttons", "click_on_image"]),
    ("image_place_watermark", E, "top_two", ["preset_buttons", "click_on_image"]),
    ("image_place_watermark", X, "top_two", ["click_on_image", "slider"]),
    ("image_place_vignette", P, "top_two", ["preset_buttons", "click_on_image"]),
    ("image_place_vignette", E, "top_two", ["preset_buttons", "click_on_image"]),
    ("image_place_vignette", X, "top_two", ["click_on_image", "slider"]),
]

NOTES = {
    "image_adjust_lightness": "Preset buttons for predictability and efficiency, sliders for explorability.",
    "image_adjust_saturation": "Preset buttons for predictability and efficiency, sliders for explorability.",
    "image_adjust_hue": "Preset buttons for predictability and efficiency, a color wheel for explorability.",
    "image_adjust_fall_color": "Color wheel or picker for predictability and explorability, presets for efficiency.",
    "image_adjust_color_balance": "Color wheel or picker for predictability and explorability, presets for efficiency.",
    "image_color_match": "No consensus on predictability, text fields for efficiency, wheel or picker for explorability.",
    "image_place_watermark": "Presets and clicks for predictability and efficiency, clicks and sliders for explorability.",
    "image_place_vignette": "Presets and clicks for predictability and efficiency, clicks and sliders for explorability.",
}


def library_holds(lib, task, aspect, kind, widgets):
    t = next(t for t in lib["tasks"] if t["name"] == task)
    c = Counter(r["widget"] for r in t["responses"][aspect])
    ranked = sorted(c.items(), key=lambda x: (-x[1], WIDGETS.index(x[0])))
    if kind == "argmax":
        return ranked[0][0] == widgets[0] and (len(ranked) == 1 or ranked[1][1] < ranked[0][1])
    if kind == "argmax_in":
        return ranked[0][0] in widgets
    if kind == "top_two":
        third = ranked[2][1] if len(ranked) > 2 else 0
        return {ranked[0][0], ranked[1][0]} == set(widgets) and third < ranked[1][1]
    if kind == "beats":
        return all(c[widgets[0]] > c[w] for w in widgets[1:])
    if kind == "no_consensus":
        n = sum(c.values())
        return max(c.values()) / n <= 0.35 and all(c[w] / n >= 0.2 for w in widgets)
    raise ValueError(kind)


def reasoning_ok(kind, widgets, ranked):
    top = ranked[0][0]
    if kind == "argmax":
        return top == widgets[0]
    if kind in ("argmax_in", "top_two", "no_consensus"):
        return top in widgets
    if kind == "beats":
        d = dict(ranked)
        return all(d.get(widgets[0], 0) > d.get(w, 0) for w in widgets[1:])
    raise ValueError(kind)


def main():
    lib = build_library()
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "library.json").write_text(json.dumps(lib, indent=2) + "\n")

    tasks = {t["name"]: t for t in lib["tasks"]}
    assertions = []
    rng = random.Random(1)
    for task, aspect, kind, widgets in MANIFEST:
        assert library_holds(lib, task, aspect, kind, widgets), (task, aspect, kind)
        t = tasks[task]
        reachable = all(
            CAPS[w] & set(t["tags"]) for w in (widgets[:1] if kind in ("argmax", "beats") else widgets)
        )
        entry = {
            "id": f"{task}.{aspect}.{kind}",
            "task": task,
            "aspect": aspect,
            "kind": kind,
            "widgets": widgets,
            "trend": NOTES[task],
        }
        assertions.append(entry)
        v = votes(t["description"], t["tags"], lib, aspect)
        hits = sum(reasoning_ok(kind, widgets, top_of_k(v, 10, rng)) for _ in range(4000))
        tot = sum(v.values())
        dist = ", ".join(f"{w}={x / tot:.2f}" for w, x in sorted(v.items(), key=lambda x: -x[1])[:4])
        flag = "" if reachable else "  [unreachable under capability filter]"
        print(f"{entry['id']:58s} p={hits / 4000:.3f}  {dist}{flag}")
    manifest = {"library_version": lib["version"], "assertions": assertions}
    (OUT / "trend_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    write_malformed(lib)


def write_malformed(lib):
    d = OUT / "malformed"
    d.mkdir(exist_ok=True)
    small = json.loads(json.dumps(lib))
    small["tasks"] = small["tasks"][:2]
    for t in small["tasks"]:
        for a in ASPECTS:
            t["responses"][a] = t["responses"][a][:3]

    def variant(fn):
        doc = json.loads(json.dumps(small))
        fn(doc)
        return doc

    cases = []

    def add(name, doc, paths, raw=None):
        text = raw if raw is not None else json.dumps(doc, indent=2) + "\n"
        (d / f"{name}.json").write_text(text)
        cases.append({"file": f"{name}.json", "error": "parse" if raw else "invalid", "paths": paths})

    add("invalid_json", None, [], raw='{"version": "1", "tasks": [\n')
    add("empty_tasks", {"version": "1", "tasks": []}, ["tasks"])
    add("missing_version", variant(lambda x: x.pop("version")), ["version"])

    def unknown_widget(x):
        x["tasks"][1]["responses"]["efficiency"][2]["widget"] = "teleport_button"
    add("unknown_widget", variant(unknown_widget), ["tasks[1].responses.efficiency[2].widget"])

    def dup_task(x):
        x["tasks"][1]["name"] = x["tasks"][0]["name"]
    add("duplicate_task_name", variant(dup_task), ["tasks[1].name"])

    def empty_reason(x):
        x["tasks"][0]["responses"]["explorability"][1]["reason"] = "   "
    add("empty_reason", variant(empty_reason), ["tasks[0].responses.explorability[1].reason"])

    def bad_aspect(x):
        x["tasks"][1]["responses"]["learnability"] = x["tasks"][1]["responses"].pop("predictability")
    add("unknown_aspect", variant(bad_aspect), ["tasks[1].responses.learnability"])

    def no_desc(x):
        x["tasks"][0].pop("description")
    add("missing_description", variant(no_desc), ["tasks[0].description"])

    def bad_tag(x):
        x["tasks"][1]["tags"].append("texture")
    add("unknown_tag", variant(bad_tag), ["tasks[1].tags[2]"])

    def dup_rater_and_type(x):
        lst = x["tasks"][0]["responses"]["predictability"]
        lst[2]["rater_id"] = lst[0]["rater_id"]
        x["tasks"][1]["responses"]["efficiency"][0]["widget"] = 3
    add("duplicate_rater_wrong_type", variant(dup_rater_and_type),
        ["tasks[0].responses.predictability[2].rater_id", "tasks[1].responses.efficiency[0].widget"])

    (d / "expected.json").write_text(json.dumps({"cases": cases}, indent=2) + "\n")


if __name__ == "__main__":
    main()
