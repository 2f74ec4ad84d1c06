"""How much of a linear wave leaks back out of a relaxation zone.

An Airy wave is generated on the left and travels three wavelengths before
it enters an absorbing zone two wavelengths long. Two probes in front of
the absorber separate the incident and reflected waves.
"""

from wavesem.studies import reflection_config, reflection_study

for shape in ("classical", "steep"):
    cfg = reflection_config()
    cfg.zones.shape = shape
    ratio, inc, ref, _ = reflection_study(cfg)
    print(f"{shape:>9} weight profile: incident {inc:.5f} m, reflected {ref:.5f} m, ratio {100 * ratio:.2f}%")
