from hypothesis import settings

# reproducible example streams so a run is repeatable bit-for-bit
settings.register_profile("repo", derandomize=True, print_blob=True)
settings.load_profile("repo")
