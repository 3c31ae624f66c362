# This file makes Python treat src as a package
