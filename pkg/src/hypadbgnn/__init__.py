"""Higher-order message passing on time-respecting paths, with edges reweighted
by how over- or under-represented they are under a hypergeometric
configuration model."""

__version__ = "0.1.0"
