#!/usr/bin/env python3
"""Golden tables for the 8-bit HSV kernel, produced with Pillow.

hue_clip.json: a 4x4 image run through the notebook hue routine
(convert to HSV, add int(hue * 255) to H, clip to [0, 255], convert back).
hsv8_roundtrip.json: Pillow's RGB -> HSV and HSV -> RGB on random pixels.
images/photo64_hue020_wrap.png: the shipped photo with H shifted by int(0.2 * 255)
modulo 256.
"""

import json
import random
from pathlib import Path

import numpy as np
from PIL import Image

OUT = Path("crates/core/fixtures/golden")

PIXELS = [
    (255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 255),
    (128, 64, 32), (12, 200, 180), (250, 128, 10), (0, 0, 0),
    (90, 90, 200), (200, 30, 120), (77, 77, 77), (255, 250, 5),
    (3, 120, 40), (180, 170, 160), (64, 0, 128), (240, 20, 230),
]


def adjust_hue(image, hue):
    img_hsv = image.convert("HSV")
    np_img = np.array(img_hsv)
    hue_shift = int(hue * 255)
    np_img = np_img.astype(np.int32)
    np_img[..., 0] = np_img[..., 0] + hue_shift
    np_img = np.clip(np_img, 0, 255).astype(np.uint8)
    return Image.fromarray(np_img, mode="HSV").convert("RGB")


def shift_hue_wrap(image, hue):
    rgba = image.convert("RGBA")
    np_img = np.array(rgba.convert("RGB").convert("HSV")).astype(np.int32)
    np_img[..., 0] = (np_img[..., 0] + int(hue * 255)) % 256
    rgb = Image.fromarray(np_img.astype(np.uint8), mode="HSV").convert("RGB")
    rgb.putalpha(rgba.getchannel("A"))
    return rgb


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    img = Image.new("RGB", (4, 4))
    img.putdata(PIXELS)
    cases = []
    for hue in [0.0, 0.1, 0.25, 0.5, 0.8, 1.0]:
        out = adjust_hue(img, hue)
        cases.append({"hue": hue, "output": [list(p) for p in out.getdata()]})
    (OUT / "hue_clip.json").write_text(json.dumps(
        {"width": 4, "height": 4, "input": [list(p) for p in PIXELS], "cases": cases}) + "\n")

    images = OUT.parent / "images"
    shift_hue_wrap(Image.open(images / "photo64.png"), 0.2).save(images / "photo64_hue020_wrap.png")

    rng = random.Random(11)
    rgb = [tuple(rng.randrange(256) for _ in range(3)) for _ in range(1024)]
    im = Image.new("RGB", (len(rgb), 1))
    im.putdata(rgb)
    hsv = list(im.convert("HSV").getdata())
    hsv_in = [tuple(rng.randrange(256) for _ in range(3)) for _ in range(1024)]
    hm = Image.new("HSV", (len(hsv_in), 1))
    hm.putdata(hsv_in)
    back = list(hm.convert("RGB").getdata())
    (OUT / "hsv8_roundtrip.json").write_text(json.dumps({
        "rgb_to_hsv": [[list(a), list(b)] for a, b in zip(rgb, hsv)],
        "hsv_to_rgb": [[list(a), list(b)] for a, b in zip(hsv_in, back)],
    }) + "\n")


if __name__ == "__main__":
    main()
