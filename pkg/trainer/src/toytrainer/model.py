"""A minimal 3-level 3D encoder-decoder with two linear synthesis heads.

Deliberately far smaller than a production five-level UNet: this exists to
demonstrate the training objective end to end at desk scale, not to
reproduce published scores.
"""

from __future__ import annotations

import torch
from torch import nn


def _block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv3d(cin, cout, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv3d(cout, cout, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class ToyEncoderDecoder(nn.Module):
    def __init__(self, base_channels: int = 8):
        super().__init__()
        c = base_channels
        self.enc1 = _block(1, c)
        self.down1 = nn.Conv3d(c, 2 * c, 2, stride=2)
        self.enc2 = _block(2 * c, 2 * c)
        self.down2 = nn.Conv3d(2 * c, 4 * c, 2, stride=2)
        self.bottom = _block(4 * c, 4 * c)
        self.up2 = nn.ConvTranspose3d(4 * c, 2 * c, 2, stride=2)
        self.dec2 = _block(4 * c, 2 * c)
        self.up1 = nn.ConvTranspose3d(2 * c, c, 2, stride=2)
        self.dec1 = _block(2 * c, c)
        self.head_anat = nn.Conv3d(c, 1, 1)
        self.head_pathol = nn.Conv3d(c, 1, 1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        f1 = self.enc1(x)
        f2 = self.enc2(self.down1(f1))
        bottom = self.bottom(self.down2(f2))
        d2 = self.dec2(torch.cat([self.up2(bottom), f2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), f1], dim=1))
        return self.head_anat(d1)[:, 0], self.head_pathol(d1)[:, 0]
