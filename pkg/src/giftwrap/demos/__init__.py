from .expert import (
    CONTACT_PHASES,
    DemoFailure,
    Frame,
    PHASES,
    ScriptedExpert,
    ScriptedExpertConfig,
    generate_demo,
)
from .dataset import (
    DatasetManifest,
    DemoRecord,
    WindowDataset,
    generate_dataset,
    load_dataset,
    load_demo_arrays,
    load_manifest,
)

__all__ = [
    "ScriptedExpert", "ScriptedExpertConfig", "generate_demo", "DemoFailure",
    "Frame", "PHASES", "CONTACT_PHASES",
    "DatasetManifest", "DemoRecord", "WindowDataset", "generate_dataset",
    "load_dataset", "load_demo_arrays", "load_manifest",
]
