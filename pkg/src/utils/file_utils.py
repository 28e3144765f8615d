"""
File utilities for experiment inputs and outputs
"""
import hashlib
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import humanize
import yaml

PathLike = Union[str, Path]

SNAPSHOT_NAME = "config_snapshot.yaml"
USER_DIR_PREFIX = "user_"


def sha256_file(path: PathLike, chunk_size: int = 1 << 20) -> str:
    """Hex SHA-256 of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(chunk_size), b''):
            digest.update(chunk)
    return digest.hexdigest()


def hash_inputs(paths: Iterable[PathLike], root: Optional[PathLike] = None) -> Dict[str, str]:
    """
    Hash every input file

    Args:
        paths: Files (directories are walked recursively, in sorted order)
        root: Keys are made relative to this directory when given

    Returns:
        Mapping of file name to SHA-256, sorted by name
    """
    files: List[Path] = []
    for path in paths:
        path = Path(path)
        if path.is_dir():
            files.extend(sorted(p for p in path.rglob('*') if p.is_file()))
        elif path.is_file():
            files.append(path)

    hashes = {}
    for file in files:
        key = str(file.relative_to(root)) if root and Path(root) in file.parents else str(file)
        hashes[key] = sha256_file(file)
    return dict(sorted(hashes.items()))


def ensure_output_dir(path: PathLike) -> Path:
    """Create the output directory if needed and make sure it is a directory"""
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise NotADirectoryError(f"Output path is not a directory: {out}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_config_snapshot(
    out_dir: PathLike,
    config: Dict[str, Any],
    seed: int,
    command: str,
    inputs: Optional[Dict[str, str]] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Write everything needed to reproduce a run next to its outputs

    Args:
        out_dir: Run output directory
        config: AppConfig.to_dict() of the effective configuration
        seed: Random seed of the run
        command: Subcommand name
        inputs: SHA-256 of every input file
        extra: Command-specific arguments

    Returns:
        Path of the snapshot file
    """
    snapshot = {
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": inputs or {},
    }
    if extra:
        snapshot["arguments"] = extra
    path = ensure_output_dir(out_dir) / SNAPSHOT_NAME
    with open(path, 'w') as f:
        yaml.safe_dump(snapshot, f, default_flow_style=False, sort_keys=True)
    return path


def user_dir(root: PathLike, user: int) -> Path:
    return Path(root) / f"{USER_DIR_PREFIX}{user:02d}"


def list_user_dirs(root: PathLike) -> List[Tuple[int, Path]]:
    """(user, directory) pairs found under a data directory, ordered by user"""
    found = []
    for child in sorted(Path(root).glob(f"{USER_DIR_PREFIX}*")):
        suffix = child.name[len(USER_DIR_PREFIX):]
        if child.is_dir() and suffix.isdigit():
            found.append((int(suffix), child))
    return sorted(found)


def format_duration(seconds: float) -> str:
    """Human-readable elapsed time"""
    return humanize.precisedelta(seconds, minimum_unit="seconds", format="%0.1f")


def format_energy(joules: float) -> str:
    """Energy with an SI prefix, e.g. 46.8 mJ"""
    return f"{humanize.metric(joules, 'J')}"
