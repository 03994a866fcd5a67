# Couette lab package
