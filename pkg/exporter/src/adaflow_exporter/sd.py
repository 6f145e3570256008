"""Diffusion-model-backed extraction: DIFT features and DDIM-inverted latents.

Selected with a model id of the form ``sd:<huggingface-id-or-local-path>``
(e.g. ``sd:stabilityai/stable-diffusion-2-1``). Requires torch plus the
diffusers/transformers stack and reachable weights; everything here is
imported lazily so the weights-free backend works without them.

Features follow the diffusion-features recipe: encode the frame to the VAE
latent, add scheduler noise for the configured timestep (0 by default, i.e.
nearly clean), run the UNet with an empty prompt, and read the activation of
one decoder up-block. Inversion runs the standard deterministic DDIM
recurrence upward through the timesteps.
"""

from __future__ import annotations

import numpy as np

from .errors import ModelLoadError

DEFAULT_LAYER = "up1"  # mid-decoder block


def _layer_index(tag: str) -> int:
    if not tag.startswith("up") or not tag[2:].isdigit():
        raise ModelLoadError(f"unknown decoder layer tag {tag!r}; expected up0..up3")
    return int(tag[2:])


class StableDiffusionBackend:
    def __init__(self, model_id: str, device: str = "cpu"):
        try:
            import torch
            from diffusers import AutoencoderKL, DDIMScheduler, UNet2DConditionModel
            from transformers import CLIPTextModel, CLIPTokenizer
        except ImportError as e:
            raise ModelLoadError(
                f"model {model_id!r} needs the torch/diffusers/transformers stack: {e}") from e
        self.torch = torch
        self.device = device
        try:
            self.vae = AutoencoderKL.from_pretrained(model_id, subfolder="vae").to(device)
            self.unet = UNet2DConditionModel.from_pretrained(model_id, subfolder="unet").to(device)
            self.scheduler = DDIMScheduler.from_pretrained(model_id, subfolder="scheduler")
            self.tokenizer = CLIPTokenizer.from_pretrained(model_id, subfolder="tokenizer")
            self.text_encoder = CLIPTextModel.from_pretrained(
                model_id, subfolder="text_encoder").to(device)
        except Exception as e:  # weights missing, offline hub, wrong repo layout
            raise ModelLoadError(f"cannot load weights for {model_id!r}: {e}") from e
        self.vae.eval()
        self.unet.eval()
        self.text_encoder.eval()
        with torch.no_grad():
            tokens = self.tokenizer([""], padding="max_length",
                                    max_length=self.tokenizer.model_max_length,
                                    return_tensors="pt")
            self.null_embedding = self.text_encoder(tokens.input_ids.to(device))[0]

    def _encode(self, frame: np.ndarray):
        torch = self.torch
        image = torch.from_numpy(frame).permute(2, 0, 1)[None].to(self.device) * 2.0 - 1.0
        with torch.no_grad():
            latent = self.vae.encode(image).latent_dist.mean
        return latent * self.vae.config.scaling_factor

    def features(self, frames: np.ndarray, layer: str = DEFAULT_LAYER,
                 timestep: int = 0, seed: int = 0) -> np.ndarray:
        torch = self.torch
        index = _layer_index(layer)
        if index >= len(self.unet.up_blocks):
            raise ModelLoadError(f"decoder has {len(self.unet.up_blocks)} up blocks, "
                                 f"layer {layer!r} out of range")
        captured = []
        hook = self.unet.up_blocks[index].register_forward_hook(
            lambda module, args, output: captured.append(output))
        generator = torch.Generator(self.device).manual_seed(seed)
        grids = []
        try:
            with torch.no_grad():
                for frame in frames:
                    latent = self._encode(frame)
                    t = torch.tensor(timestep, device=self.device)
                    if timestep > 0:
                        noise = torch.randn(latent.shape, generator=generator,
                                            device=self.device)
                        latent = self.scheduler.add_noise(latent, noise, t)
                    captured.clear()
                    self.unet(latent, t, encoder_hidden_states=self.null_embedding)
                    activation = captured[-1][0] if isinstance(captured[-1], tuple) \
                        else captured[-1]
                    grids.append(activation[0].permute(1, 2, 0).cpu().numpy())
        finally:
            hook.remove()
        return np.stack(grids).astype(np.float32)

    def invert(self, frames: np.ndarray, timesteps: int) -> np.ndarray:
        """DDIM inversion; returns (timesteps, n, h*w, c), noise increasing in t."""
        torch = self.torch
        self.scheduler.set_timesteps(timesteps)
        schedule = list(reversed(self.scheduler.timesteps.tolist()))
        alphas = self.scheduler.alphas_cumprod
        stacks = []
        with torch.no_grad():
            for frame in frames:
                latent = self._encode(frame)
                states = []
                previous_t = -1
                for t in schedule:
                    eps = self.unet(latent, torch.tensor(t, device=self.device),
                                    encoder_hidden_states=self.null_embedding).sample
                    a_prev = alphas[previous_t] if previous_t >= 0 else torch.tensor(1.0)
                    a_next = alphas[t]
                    x0 = (latent - (1 - a_prev).sqrt() * eps) / a_prev.sqrt()
                    latent = a_next.sqrt() * x0 + (1 - a_next).sqrt() * eps
                    states.append(latent[0].permute(1, 2, 0).reshape(-1, latent.shape[1])
                                  .cpu().numpy())
                    previous_t = t
                stacks.append(np.stack(states))
        return np.stack(stacks, axis=1).astype(np.float32)
