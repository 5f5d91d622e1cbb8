"""Consistency checks of a broadcast package before sites evaluate it."""

import logging

import numpy as np

from fusion.exceptions import ProtocolError

logger = logging.getLogger(__name__)


class BroadcastPackageValidator:
    """Validate that a broadcast package is internally consistent.

    Every referenced source id must appear exactly once and all model dimensions
    must agree with the covariate dimension, the number of sites and dim β.
    """

    @staticmethod
    def validate(package):
        """Check a package.

        Parameters
        ----------
        package : BroadcastPackage
            Package to check

        Returns
        -------
        tuple of (bool, list)
            First element is True if consistent, False otherwise.
            Second element is the list of problems found.
        """
        errors = []
        errors.extend(BroadcastPackageValidator._validate_sites(package))
        errors.extend(BroadcastPackageValidator._validate_models(package))
        return len(errors) == 0, errors

    @staticmethod
    def check(package):
        """Raise ``ProtocolError`` listing every problem of an inconsistent package."""
        is_valid, errors = BroadcastPackageValidator.validate(package)
        if not is_valid:
            logger.error(f"Inconsistent broadcast package: {errors}")
            raise ProtocolError(
                f"Inconsistent broadcast package ({len(errors)} problems)",
                details={"errors": errors},
            )

    @staticmethod
    def _validate_sites(package):
        errors = []
        site_ids = list(package.site_sizes)
        sources = site_ids[1:]
        if not site_ids:
            return ["Package lists no sites"]
        if len(set(site_ids)) != len(site_ids):
            errors.append("Site ids are not unique")
        if package.weights.source_ids != sources:
            errors.append(
                f"Weight model sources {package.weights.source_ids} differ from {sources}"
            )
        named = (("lambdas", package.lambdas), ("normalizers", package.normalizers))
        for name, entries in named:
            if sorted(entries) != sorted(sources):
                errors.append(
                    f"{name} cover {sorted(entries)}, expected {sorted(sources)}"
                )
        return errors

    @staticmethod
    def _validate_models(package):
        errors = []
        k = len(package.site_sizes) - 1
        q = package.weights.total_dimension
        d = package.dimension

        if package.feature_spec.dimension != d:
            errors.append("Feature spec dimension differs from the covariate dimension")
        for site_id, model in package.lambdas.items():
            if model.feature_spec != package.feature_spec:
                errors.append(f"Density ratio of {site_id} uses another feature basis")

        expected_shapes = {
            "outcome": (),
            "r_wstar": (k + 1,),
            "r_wstar_outer": (k + 1, k + 1),
            "dtilde": (),
            "dtilde_wstar": (k + 1,),
            "xi_alignment": (q, k + 1),
            "atilde": (q,),
            "atilde_wstar": (q, k + 1),
        }
        for name, model in package.nuisance_models.items():
            if name == "propensity":
                if model.standardizer.dimension != d:
                    errors.append("Propensity model has the wrong covariate dimension")
                continue
            if model.spec.dimension != d:
                errors.append(
                    f"{name} has covariate dimension {model.spec.dimension}, expected {d}"
                )
            if tuple(model.output_shape) != expected_shapes[name]:
                errors.append(
                    f"{name} has output shape {tuple(model.output_shape)}, "
                    f"expected {expected_shapes[name]}"
                )
        for site_id, normalizer in package.normalizers.items():
            fitted = normalizer.model
            if fitted is not None and np.ndim(fitted.coefficients) != 1:
                errors.append(f"Normalizer of {site_id} is not scalar-valued")
        return errors
