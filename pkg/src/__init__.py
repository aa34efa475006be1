# L^p Estimation - Source Package
