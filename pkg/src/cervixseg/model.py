"""Multi-task U-Net: segmentation decoder plus a parallel classification
branch fed from the contracting path.

The encoder halves resolution and doubles channels per stage; the deepest
(bottleneck) feature map feeds both the expanding path (via skip connections)
and the classification branch (global average pooling into fully connected
layers ending in a single sigmoid unit). Zeroing every decoder parameter
leaves the classification output unchanged.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

from .errors import ConfigError

__all__ = [
    "NetworkConfig",
    "BatchOutput",
    "MultiTaskUNet",
    "ActivationCapture",
    "build_model",
    "expose_activations",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass
class NetworkConfig:
    depth: int = 4  # encoder stages (downsampling steps)
    base_channels: int = 64
    fc_widths: tuple[int, ...] = (256,)
    dropout_rate: float = 0.5
    input_size: int = 256
    norm: str = "batch"  # "batch" | "none"

    def validate(self) -> None:
        if self.depth < 2:
            raise ConfigError(f"depth: need >= 2, got {self.depth}")
        if self.base_channels < 4:
            raise ConfigError(f"base_channels: need >= 4, got {self.base_channels}")
        if self.input_size % (2**self.depth) != 0:
            raise ConfigError(
                f"input_size: {self.input_size} not divisible by 2^depth = {2**self.depth}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate: need a value in [0, 1), got {self.dropout_rate}")
        if self.norm not in ("batch", "none"):
            raise ConfigError(f"norm: expected 'batch' or 'none', got {self.norm!r}")

    @property
    def bottleneck_channels(self) -> int:
        return self.base_channels * 2**self.depth

    @classmethod
    def desk(cls) -> "NetworkConfig":
        """Small preset exercising the same code path on commodity CPUs."""
        return cls(depth=3, base_channels=16, input_size=64)


@dataclass
class BatchOutput:
    """Per-batch predictions of both heads."""

    seg_probs: torch.Tensor  # (B, 1, H, W) in [0, 1]
    cls_probs: torch.Tensor  # (B,) in (0, 1)


def _conv_block(in_ch: int, out_ch: int, norm: str) -> nn.Sequential:
    layers: list[nn.Module] = []
    for i, (ci, co) in enumerate(((in_ch, out_ch), (out_ch, out_ch))):
        layers.append(nn.Conv2d(ci, co, kernel_size=3, padding=1, bias=norm == "none"))
        if norm == "batch":
            layers.append(nn.BatchNorm2d(co))
        layers.append(nn.ReLU(inplace=True))
    return nn.Sequential(*layers)


class MultiTaskUNet(nn.Module):
    def __init__(self, config: NetworkConfig):
        super().__init__()
        config.validate()
        self.config = config
        ch = config.base_channels
        depth = config.depth

        self.encoders = nn.ModuleDict()
        in_ch = 1
        enc_channels = []
        for i in range(depth):
            out_ch = ch * 2**i
            self.encoders[f"enc{i + 1}"] = _conv_block(in_ch, out_ch, config.norm)
            enc_channels.append(out_ch)
            in_ch = out_ch
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _conv_block(in_ch, config.bottleneck_channels, config.norm)

        self.upsamplers = nn.ModuleList()
        self.decoders = nn.ModuleList()
        in_ch = config.bottleneck_channels
        for i in reversed(range(depth)):
            skip_ch = enc_channels[i]
            self.upsamplers.append(nn.ConvTranspose2d(in_ch, skip_ch, kernel_size=2, stride=2))
            self.decoders.append(_conv_block(skip_ch * 2, skip_ch, config.norm))
            in_ch = skip_ch
        self.seg_head = nn.Conv2d(in_ch, 1, kernel_size=1)

        fc_layers: list[nn.Module] = []
        width_in = config.bottleneck_channels
        for width in config.fc_widths:
            fc_layers.append(nn.Linear(width_in, width))
            fc_layers.append(nn.ReLU(inplace=True))
            if config.dropout_rate > 0:
                fc_layers.append(nn.Dropout(config.dropout_rate))
            width_in = width
        fc_layers.append(nn.Linear(width_in, 1))
        self.cls_head = nn.Sequential(*fc_layers)

    def capture_layers(self) -> list[str]:
        """Layer names valid for activation capture."""
        return [*self.encoders.keys(), "bottleneck"]

    def forward_logits(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(seg_logits (B,1,H,W), cls_logits (B,)) before the sigmoids."""
        size = self.config.input_size
        if x.ndim != 4 or x.shape[-2:] != (size, size):
            raise ValueError(
                f"expected input of spatial size {size}x{size} (B, 1, {size}, {size}), "
                f"got shape {tuple(x.shape)}"
            )
        skips = []
        for name in self.encoders:
            x = self.encoders[name](x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)

        pooled = x.mean(dim=(2, 3))
        cls_logits = self.cls_head(pooled).squeeze(-1)

        for up, dec, skip in zip(self.upsamplers, self.decoders, reversed(skips)):
            x = up(x)
            x = dec(torch.cat([skip, x], dim=1))
        seg_logits = self.seg_head(x)
        return seg_logits, cls_logits

    def forward(self, x: torch.Tensor) -> BatchOutput:
        seg_logits, cls_logits = self.forward_logits(x)
        return BatchOutput(seg_probs=torch.sigmoid(seg_logits), cls_probs=torch.sigmoid(cls_logits))

    def capture(self, layer_name: str) -> "ActivationCapture":
        modules = dict(self.encoders)
        modules["bottleneck"] = self.bottleneck
        if layer_name not in modules:
            raise KeyError(
                f"unknown layer {layer_name!r}; valid layers: {self.capture_layers()}"
            )
        return ActivationCapture(modules[layer_name], layer_name)


class ActivationCapture:
    """Records a layer's activation and its gradient; latest forward wins."""

    def __init__(self, module: nn.Module, layer_name: str):
        self.layer_name = layer_name
        self.activation: torch.Tensor | None = None
        self.gradient: torch.Tensor | None = None
        self._handle = module.register_forward_hook(self._on_forward)

    def _on_forward(self, module, inputs, output):
        self.activation = output
        self.gradient = None
        if output.requires_grad:
            output.register_hook(self._on_gradient)

    def _on_gradient(self, grad):
        self.gradient = grad

    def close(self) -> None:
        self._handle.remove()

    def __enter__(self) -> "ActivationCapture":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def build_model(config: NetworkConfig, seed: int = 0) -> MultiTaskUNet:
    """Construct the network with seeded parameter initialization."""
    config.validate()
    torch.manual_seed(seed)
    return MultiTaskUNet(config)


def expose_activations(model, layer_name: str) -> ActivationCapture:
    """Capture handle for a named encoder stage or the bottleneck."""
    return model.capture(layer_name)


def save_checkpoint(model: MultiTaskUNet, path, extra: dict | None = None) -> None:
    """Self-describing archive: network config + named parameter tensors."""
    payload = {
        "format": "cervixseg-checkpoint-v1",
        "network": asdict(model.config),
        "state_dict": model.state_dict(),
        "extra": extra or {},
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path) -> tuple[MultiTaskUNet, dict]:
    """Rebuild the model from a checkpoint, validating config compatibility."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(payload, dict) or payload.get("format") != "cervixseg-checkpoint-v1":
        raise ValueError(f"not a recognized checkpoint file: {path}")
    net = payload["network"]
    net["fc_widths"] = tuple(net["fc_widths"])
    config = NetworkConfig(**net)
    model = MultiTaskUNet(config)
    try:
        model.load_state_dict(payload["state_dict"], strict=True)
    except RuntimeError as e:
        raise ValueError(f"checkpoint incompatible with its declared config: {e}") from e
    return model, payload.get("extra", {})
