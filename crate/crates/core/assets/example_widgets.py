import colorsys
import numpy as np
import ipywidgets as widgets
from IPython.display import display
from PIL import Image

source = Image.open("photo.png").convert("RGBA")
out = widgets.Output()


def shift_hue(img, amount):
    rgb, alpha = img.convert("RGB"), img.getchannel("A")
    hsv = np.array(rgb.convert("HSV")).astype(np.int32)
    hsv[..., 0] = (hsv[..., 0] + int(round(amount * 255))) % 256
    shifted = Image.fromarray(hsv.astype(np.uint8), "HSV").convert("RGB")
    shifted.putalpha(alpha)
    return shifted


def show(amount):
    with out:
        out.clear_output(wait=True)
        display(shift_hue(source, amount))


# Slider
slider = widgets.FloatSlider(value=0.0, min=0.0, max=1.0, step=0.01, description="Hue")
slider.observe(lambda change: show(change["new"]), names="value")

# Dropdown
dropdown = widgets.Dropdown(options=[0.0, 0.2, 0.4, 0.6, 0.8], value=0.0, description="Hue")
dropdown.observe(lambda change: show(change["new"]), names="value")

# Radio Buttons
radio = widgets.RadioButtons(options=[0.0, 0.2, 0.4, 0.6, 0.8], value=0.0, description="Hue")
radio.observe(lambda change: show(change["new"]), names="value")

# Text Field
text = widgets.BoundedFloatText(value=0.0, min=0.0, max=1.0, step=0.01, description="Hue")
text.observe(lambda change: show(change["new"]), names="value")

# Preset Buttons
presets = [(0.0, "red", "#ff0000"), (0.2, "green", "#008000"), (0.4, "cyan", "#00ffff")]
buttons = []
for amount, name, colour in presets:
    button = widgets.Button(description=name, style={"button_color": colour})
    button.on_click(lambda _, a=amount: show(a))
    buttons.append(button)
preset_row = widgets.HBox(buttons)

# Color Picker
picker = widgets.ColorPicker(value="#ff0000", description="Hue")


def on_pick(change):
    r, g, b = (int(change["new"][i:i + 2], 16) / 255 for i in (1, 3, 5))
    show(colorsys.rgb_to_hsv(r, g, b)[0])


picker.observe(on_pick, names="value")

# Color Wheel
wheel_canvas = widgets.Image(format="png", width=160, height=160)
wheel_angle = widgets.FloatText(value=0.0, layout={"display": "none"})
wheel_angle.observe(lambda change: show((change["new"] % 360) / 360), names="value")
wheel = widgets.VBox([wheel_canvas, wheel_angle])

# Click on Image
from ipyevents import Event

click_target = widgets.Image(value=open("photo.png", "rb").read(), format="png")
clicks = Event(source=click_target, watched_events=["click"])


def on_click(event):
    x = event["relativeX"] / click_target.width
    show(x)


clicks.on_dom_event(on_click)

display(widgets.VBox([slider, dropdown, radio, text, preset_row, picker, wheel, click_target]), out)
