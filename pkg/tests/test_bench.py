"""
Tests for operation accounting of the authentication phase.
"""
import pytest

from charging.bench import CS_USP, RoleComparison, run_bench, scale_point
from charging.exceptions import BenchmarkError

pytestmark = pytest.mark.integration


@pytest.fixture(scope='module')
def report():
    return run_bench(iterations=3, seed=0)


class TestBench:
    """Test the benchmark report."""

    def test_within_tolerance(self, report):
        """Test that both sides match the reference counts."""
        assert report.user.within_tolerance
        assert report.cs_usp.within_tolerance
        assert report.within_tolerance

    def test_signature_counts_exact(self, report):
        """Test that signature work matches the reference exactly."""
        assert report.user.measured['ecdsa_sign'] == 0
        assert report.user.measured['ecdsa_verify'] == 1
        assert report.cs_usp.measured['ecdsa_sign'] == 1
        assert report.cs_usp.measured['ecdsa_verify'] == 1

    def test_hash_counts_close(self, report):
        """Test that hash counts are within two of the reference."""
        assert abs(report.user.delta['hash']) <= 2
        assert abs(report.cs_usp.delta['hash']) <= 2

    def test_counts_are_stable(self, report):
        """Test that the machine-readable counts do not depend on the run."""
        again = run_bench(iterations=3, seed=0)
        assert again.result_fields() == report.result_fields()

    def test_mapping_names_every_op(self, report):
        """Test that the mapping covers the user's signature verification."""
        rows = [row for row in report.mapping if row[0] == 'user' and row[2] == 'ecdsa_verify']
        assert rows and rows[0][3] == 1

    def test_render(self, report):
        """Test the human-readable report."""
        text = report.render()
        assert 'Verify_ECDSA' in text
        assert CS_USP in text

    def test_formula(self):
        """Test the compact operation formula."""
        comparison = RoleComparison('user', {'hash': 6, 'ecdsa_verify': 1}, {'hash': 6, 'ecdsa_verify': 1})
        assert comparison.formula(comparison.measured) == '6H+Verify_ECDSA'

    def test_iterations_must_be_positive(self):
        """Test that a benchmark of zero sessions is refused."""
        with pytest.raises(BenchmarkError):
            run_bench(iterations=0)

    def test_scale_point(self):
        """Test that the USP's hash work grows with the EV population."""
        small, large = scale_point(1), scale_point(3)
        assert large.counts['usp']['hash'] == 3 * small.counts['usp']['hash']
