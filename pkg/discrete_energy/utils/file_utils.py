"""File system utilities."""

import os


def ensure_directory_exists(path: str) -> None:
    """
    Ensures that ``path`` exists as a directory.

    Args:
        path (str): Directory to create; an empty string means the working directory.
    """
    if path:
        os.makedirs(path, exist_ok=True)


def ensure_parent_exists(filepath: str) -> None:
    """Create the directory that will hold ``filepath``."""
    ensure_directory_exists(os.path.dirname(filepath))
