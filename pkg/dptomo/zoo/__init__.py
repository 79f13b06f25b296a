from . import presets, suites
