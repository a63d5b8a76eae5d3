"""medxgan: classifier-guided GAN with a disentangled anatomy/pathology
latent code, latent inversion, counterfactual synthesis, attribution maps,
and quantitative evaluation protocols on a synthetic phantom dataset."""

__version__ = "0.1.0"
