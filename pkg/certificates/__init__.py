from .audit import CertificateReport, CertificateSet, PropertyVerdict, trajectory_audit
from .bounds import (
    CertificateError, InnerCertificate, OuterCertificate, checked_min_eigenvalue, eig2,
    epsilon_interval, eta_interval, inner_certificate, inner_gain, lemma2_bound, lyapunov_inner,
    lyapunov_outer, outer_certificate, outer_Q_and_bounds, small_gain_check,
)
