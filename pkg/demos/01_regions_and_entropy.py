"""Load a region grid, project points into it, and read off category mixes.

Run: python demos/01_regions_and_entropy.py
"""

import numpy as np

from honflow import (
    CategoryTaxonomy,
    Poi,
    SpatialIndex,
    derive_adjacency,
    entropy,
    load_regions,
    project_points,
)
from honflow.geo import density_vector, dominant_category
from honflow.synth import make_grid_regions

tax = CategoryTaxonomy.default()

regions = derive_adjacency(load_regions(make_grid_regions(4, 4, cell_deg=0.01)))
print(f"{len(regions.ids)} regions, e.g. {regions.ids[0]} with neighbors "
      f"{sorted(regions.by_id[regions.ids[0]].neighbors)}")

# scatter synthetic POIs: the north half skews Food, the south half is mixed
rng = np.random.default_rng(1)
pois = []
for i in range(400):
    lon, lat = rng.uniform(0, 0.04), rng.uniform(0, 0.04)
    if lat > 0.02:
        cat = "Food" if rng.random() < 0.8 else "Nightlife Spot"
    else:
        cat = tax.categories[int(rng.integers(0, tax.size))]
    pois.append(Poi(f"p{i}", cat, lat=lat, lon=lon))

assignment = project_points(SpatialIndex(regions), pois)
print(f"assigned {sum(len(m) for m in assignment.members.values())} of {len(pois)} points")

print("\nregion    n    entropy  dominant")
for rid in regions.ids:
    d = density_vector(rid, assignment, tax, weighting="poi_count")
    print(f"{rid}  {int(d.support):3d}  {entropy(d):7.4f}  {dominant_category(d, tax)}")

print("\nLow entropy = single-purpose block; high entropy = mixed-use block.")
