# ===============================
# lsdnn/forms.py
# ===============================
"""
Валидация конфигурации запуска (RunConfig).
"""
from collections import OrderedDict

from django import forms
from django.conf import settings

from lsdnn.services.evaluation import make_dot_pattern
from lsdnn.services.training import TrainingSettings
from lsdnn.services.unet import MicroUNetConfig
from optics.exceptions import OpticsError, SamplingCriterionError
from optics.services.forward import ForwardConfig, ForwardKind, Resample, default_pitch


class RunConfigForm(forms.Form):
    """Все поля RunConfig; значения приходят строками из файла и флагов"""

    kind = forms.ChoiceField(choices=ForwardKind.choices)
    n = forms.IntegerField(min_value=8, max_value=4096)
    b = forms.FloatField(min_value=1.0)
    wavelength = forms.FloatField(min_value=1e-12)
    z = forms.FloatField(min_value=1e-12)
    pitch = forms.FloatField(required=False, min_value=1e-15)
    resample = forms.ChoiceField(choices=Resample.choices)
    p = forms.FloatField(required=False, min_value=0.0)
    phi_max = forms.FloatField(min_value=1e-6)
    count = forms.IntegerField(min_value=1)
    source = forms.CharField(required=False)
    epochs = forms.IntegerField(min_value=1)
    batch_size = forms.IntegerField(min_value=1)
    lr = forms.FloatField(min_value=1e-12)
    seed = forms.IntegerField(min_value=0)
    widths = forms.CharField()
    res_blocks = forms.IntegerField(min_value=0)
    kernel_size = forms.IntegerField(min_value=1)
    width_multiplier = forms.IntegerField(min_value=1, max_value=4)
    wiener_eps = forms.FloatField(min_value=1e-300)
    dot_spacing = forms.IntegerField(min_value=2)
    dot_count = forms.IntegerField(min_value=2)
    out = forms.CharField()

    def clean_widths(self):
        raw = self.cleaned_data["widths"]
        try:
            widths = tuple(int(part) for part in raw.split(",") if part.strip())
        except ValueError:
            raise forms.ValidationError(f"widths must be comma-separated integers, got {raw!r}")
        if not widths or any(w <= 0 for w in widths):
            raise forms.ValidationError("widths must be positive integers")
        return widths

    def clean(self):
        cleaned = super().clean()
        if self.errors:
            return cleaned
        kind = cleaned["kind"]
        n = cleaned["n"]
        if cleaned.get("p") is None:
            cleaned["p"] = settings.LSDNN_DEFAULT_P[kind]
        if cleaned.get("pitch") is None:
            cleaned["pitch"] = default_pitch(n) if kind == ForwardKind.QPR else 1.0

        try:
            self._forward = ForwardConfig(
                kind=kind, n=n, b=cleaned["b"], wavelength=cleaned["wavelength"],
                z=cleaned["z"], pitch=cleaned["pitch"], resample=cleaned["resample"],
            )
        except SamplingCriterionError as exc:
            self.add_error("z", str(exc))
        except OpticsError as exc:
            self.add_error(None, str(exc))

        try:
            self._unet = MicroUNetConfig(
                n=n, widths=cleaned["widths"], res_blocks=cleaned["res_blocks"],
                kernel_size=cleaned["kernel_size"],
                width_multiplier=cleaned["width_multiplier"],
            )
        except ValueError as exc:
            self.add_error("n", str(exc))

        try:
            make_dot_pattern(n, cleaned["dot_spacing"], cleaned["dot_count"])
        except OpticsError as exc:
            self.add_error("dot_spacing", str(exc))
        return cleaned

    def forward_config(self) -> ForwardConfig:
        return self._forward

    def unet_config(self) -> MicroUNetConfig:
        return self._unet

    def training_settings(self) -> TrainingSettings:
        data = self.cleaned_data
        return TrainingSettings(
            epochs=data["epochs"], batch_size=data["batch_size"], lr=data["lr"],
            seed=data["seed"], unet=self._unet,
        )

    def resolved(self) -> OrderedDict:
        """Полностью раскрытая конфигурация в порядке полей формы (строки)"""
        result = OrderedDict()
        for name in self.fields:
            value = self.cleaned_data.get(name)
            if name == "widths":
                value = ",".join(str(w) for w in value)
            elif isinstance(value, float):
                value = repr(float(value))
            elif value is None:
                value = ""
            result[name] = str(value)
        return result

    def error_text(self) -> str:
        lines = []
        for field, errors in self.errors.items():
            label = "config" if field == "__all__" else field
            for error in errors:
                lines.append(f"{label}: {error}")
        return "; ".join(lines)
