"""Reference kernels in the simulator's assembly dialect."""
from importlib import resources

NAMES = ("daxpy_scalar", "daxpy_sve", "strlen_scalar", "strlen_sve", "linked_list_sve", "vl_probe")


def path(name: str):
    return resources.files(__name__).joinpath(f"{name}.s")


def source(name: str) -> str:
    return path(name).read_text(encoding="utf-8")
