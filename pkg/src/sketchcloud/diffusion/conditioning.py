"""Condition construction shared by training and sampling.

The geometry condition uses the text embedding only when the prompt
carries shape information (a shape adjective); the appearance condition
uses it whenever a prompt is present. With no text, the fusion switch
reduces both to sketch-only conditions. Re-editing and segmentation use
the text feature directly as the appearance condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

import numpy as np

from ..data.prompts import TextPrompt, has_shape_description
from ..data.sketch import SketchImage
from ..encoder import SketchEncoder, sketch_to_tensor
from ..fusion import ConditionFusion
from ..nninit import init_parameters
from ..textenc import TextEncoder, encode_text

APPEARANCE_CONDITIONS = ("fused", "text")


@dataclass
class ConditionNetworks:
    """Sketch encoder, text encoder, and one fusion head per stage kind."""

    sketch_encoder: SketchEncoder
    text_encoder: TextEncoder
    fusion_geometry: ConditionFusion
    fusion_appearance: ConditionFusion

    @classmethod
    def build(cls, rng: np.random.Generator, sketch_size: int = 64, d_f: int = 128,
              heads: int = 4) -> "ConditionNetworks":
        nets = cls(
            sketch_encoder=SketchEncoder(in_size=sketch_size).double(),
            text_encoder=TextEncoder(out_dim=d_f).double(),
            fusion_geometry=ConditionFusion("geometry", dim=d_f, heads=heads).double(),
            fusion_appearance=ConditionFusion("appearance", dim=d_f, heads=heads).double(),
        )
        for module in nets.modules():
            init_parameters(module, rng)
        return nets

    def modules(self) -> tuple[nn.Module, ...]:
        return (
            self.sketch_encoder,
            self.text_encoder,
            self.fusion_geometry,
            self.fusion_appearance,
        )

    def eval(self) -> "ConditionNetworks":
        for m in self.modules():
            m.eval()
        return self

    def embed_sketch(self, sketch: SketchImage | torch.Tensor) -> torch.Tensor:
        x = sketch if isinstance(sketch, torch.Tensor) else sketch_to_tensor(sketch)
        if x.dim() == 2:
            x = x.view(1, 1, *x.shape)
        return self.sketch_encoder(x).view(-1)

    def embed_text(self, prompt: TextPrompt | str | None) -> torch.Tensor | None:
        if prompt is None:
            return None
        return encode_text(self.text_encoder, prompt)

    def condition_geometry(
        self, s: torch.Tensor, prompt: TextPrompt | None
    ) -> torch.Tensor:
        t = self.embed_text(prompt) if has_shape_description(prompt) else None
        return self.fusion_geometry(s, t)

    def condition_appearance(
        self, s: torch.Tensor, prompt: TextPrompt | None
    ) -> torch.Tensor:
        return self.fusion_appearance(s, self.embed_text(prompt))

    def condition_text_only(self, text: TextPrompt | str) -> torch.Tensor:
        """Direct text feature, used for re-editing and segmentation."""
        return self.embed_text(text)

    def probe_embedding(self, sketch: SketchImage | torch.Tensor) -> np.ndarray:
        """Sketch-only geometry condition, as a numpy vector (for probing)."""
        with torch.no_grad():
            s = self.embed_sketch(sketch)
            return self.condition_geometry(s, None).numpy()
