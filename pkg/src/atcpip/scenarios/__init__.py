"""Built-in scenario files shipped as package data."""

from importlib import resources

BUILTIN_SCENARIOS = (
    "uc1_dataset",
    "uc2_social_game",
    "uc3_style_transfer",
    "uc4_multihop",
)


def builtin_bytes(name):
    """Raw canonical bytes of a built-in scenario file."""
    if name not in BUILTIN_SCENARIOS:
        raise KeyError(name)
    return (resources.files(__package__) / f"{name}.json").read_bytes()
