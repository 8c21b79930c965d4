"""Training checkpoints: network, optimizer state, configs and the epoch log."""
import logging
import os
import pickle
from typing import Any, Dict, List, Optional

import torch

from iscat.common.errors import StoreError, VersionMismatchError

CHECKPOINT_VERSION = 1


def write_checkpoint(
    path: str,
    net: torch.nn.Module,
    optimizer: torch.optim.Optimizer,
    epoch: int,
    configs: Dict[str, Any],
    log: Optional[List[Dict[str, Any]]] = None,
):
    """Saves everything needed to resume after ``epoch`` has completed."""
    state = {
        "format_version": CHECKPOINT_VERSION,
        "epoch": epoch,
        "net": net.state_dict(),
        "optimizer": optimizer.state_dict(),
        "configs": configs,
        "log": list(log or []),
    }
    tmp = f"{path}.tmp"
    torch.save(state, tmp)
    os.replace(tmp, path)
    logging.debug("Saved checkpoint for epoch %d to %s", epoch, path)


def read_checkpoint(path: str) -> Dict[str, Any]:
    try:
        state = torch.load(path, map_location="cpu", weights_only=True)
    except (pickle.UnpicklingError, RuntimeError, EOFError) as e:
        raise StoreError(f"cannot read checkpoint {path}: {e}") from e

    if not isinstance(state, dict) or "format_version" not in state:
        raise StoreError(f"{path} is not an iscat checkpoint")
    if state["format_version"] != CHECKPOINT_VERSION:
        raise VersionMismatchError(
            f"{path} has checkpoint version {state['format_version']}, expected {CHECKPOINT_VERSION}"
        )
    return state


def restore(state: Dict[str, Any], net: torch.nn.Module, optimizer: Optional[torch.optim.Optimizer] = None):
    net.load_state_dict(state["net"])
    if optimizer is not None:
        optimizer.load_state_dict(state["optimizer"])
