# L^p Estimation Library
