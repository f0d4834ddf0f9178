"""
Continuum objects: excursions, excursion-coded real trees and K-ISE samples
"""
from .excursion import (Excursion, contour_excursion, contour_first_visits, sample_normalized_excursion,
                        tree_distance)
from .crt import MarkedRealTree, reduce_crt
from .ise import KISESample, embed_gaussian, sample_kise
