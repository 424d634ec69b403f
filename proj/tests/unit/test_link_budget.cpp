#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "qlink/error.hpp"
#include "qlink/link_budget.hpp"
#include "qlink/random.hpp"

using namespace qlink;

namespace {

BudgetParams with_ta(double ta) {
  BudgetParams p;
  p.atmosphere.t_zenith = ta;
  return p;
}

PassSummary measured_base() { return {210.0, 7.0, 16.0, 0.13}; }

}  // namespace

TEST_SUITE("link_budget") {
  TEST_CASE("solid angle and aperture") {
    const BudgetParams p;
    CHECK(solid_angle(p) == doctest::Approx(8.397894366549912e-9).epsilon(1e-12));
    CHECK(equivalent_aperture(solid_angle(p)) * 1e6 == doctest::Approx(103.4047).epsilon(1e-5));
    BudgetParams doubled = p;
    doubled.effective_ccr_count *= 2.0;
    CHECK(solid_angle(doubled) == doctest::Approx(2.0 * solid_angle(p)).epsilon(1e-15));
  }

  TEST_CASE("diffraction transmittance") {
    const BudgetParams p;
    const auto t = diffraction_transmittance(p, 8.2e6);
    CHECK_FALSE(t.clamped);
    CHECK(t.value == doctest::Approx(3.1294951812860833e-6).epsilon(1e-12));
    CHECK(to_db(t.value) == doctest::Approx(-55.0453).epsilon(1e-5));
    CHECK(to_db(diffraction_transmittance(p, 16.4e6).value) == doctest::Approx(-61.0659).epsilon(1e-5));
    CHECK(diffraction_transmittance(p, 16.4e6).value == doctest::Approx(t.value / 4.0).epsilon(1e-14));
    CHECK(t.value * solid_angle(p) * 8.2e6 * 8.2e6 == doctest::Approx(p.telescope_area_m2).epsilon(1e-14));
    const auto close = diffraction_transmittance(p, 10.0);
    CHECK(close.clamped);
    CHECK(close.value == 1.0);
    CHECK_THROWS_AS(diffraction_transmittance(p, 0.0), Error);
  }

  TEST_CASE("received mean photon number") {
    const auto p = with_ta(0.7);
    CHECK(mu_received(p, 8.2e6, 16.0) == doctest::Approx(2.2782724919762687e-6).epsilon(1e-12));
    CHECK(mu_received(p, 8.2e6, 0.0) == 0.0);
    CHECK(mu_sat_estimate(p, 8.2e6, mu_received(p, 8.2e6, 16.0)) == doctest::Approx(16.0).epsilon(1e-12));
    CHECK(mu_sat_estimate(p, 8.2e6, 0.0) == 0.0);
    CHECK(mu_sat_estimate(p, 8.2e6, 2e-6) == doctest::Approx(2.0 * mu_sat_estimate(p, 8.2e6, 1e-6)).epsilon(1e-14));
    CHECK_THROWS_AS(mu_received(p, 8.2e6, -1.0), Error);
    CHECK_THROWS_AS(mu_sat_estimate(p, 8.2e6, -1.0), Error);
  }

  TEST_CASE("received photon number is multiplicative and monotone in each efficiency") {
    const BudgetParams base;
    const double mu0 = mu_received(base, 8.2e6, 16.0);
    auto scaled = [&](auto setter) {
      BudgetParams p = base;
      setter(p);
      return mu_received(p, 8.2e6, 16.0);
    };
    CHECK(scaled([](BudgetParams& p) { p.eta_rx *= 0.5; }) == doctest::Approx(0.5 * mu0).epsilon(1e-14));
    CHECK(scaled([](BudgetParams& p) { p.eta_det *= 0.5; }) == doctest::Approx(0.5 * mu0).epsilon(1e-14));
    CHECK(scaled([](BudgetParams& p) { p.atmosphere.t_zenith *= 0.5; }) == doctest::Approx(0.5 * mu0).epsilon(1e-14));
    CHECK(scaled([](BudgetParams& p) { p.telescope_area_m2 *= 0.5; }) == doctest::Approx(0.5 * mu0).epsilon(1e-14));
  }

  TEST_CASE("degenerate efficiency cannot be inverted") {
    BudgetParams p;
    p.telescope_area_m2 = 1e-300;
    p.eta_rx = 1e-200;
    try {
      mu_sat_estimate(p, 8.2e6, 1e-6);
      FAIL("expected DivisionDegenerate");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::division_degenerate);
    }
  }

  TEST_CASE("atmosphere model") {
    AtmosphereModel a;
    CHECK(a.transmittance() == 0.7);
    a.mode = AtmosphereModel::Mode::zenith_scaled;
    a.zenith_angle_rad = kPi / 3.0;
    CHECK(a.transmittance() == doctest::Approx(0.49).epsilon(1e-12));
    a.zenith_angle_rad = 86.0 * kPi / 180.0;
    CHECK_THROWS_AS(a.validate(), Error);
    BudgetParams bad;
    bad.eta_rx = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("lognormal density") {
    const FadingModel f{4.7, 1.4};
    const double median = std::exp(4.7);
    CHECK(fading_pdf(f, median) == doctest::Approx(1.0 / (median * 1.4 * std::sqrt(2.0 * kPi))).epsilon(1e-14));
    const double mass = oracle::integrate([&](double u) { return fading_pdf(f, std::exp(u)) * std::exp(u); },
                                          4.7 - 14.0, 4.7 + 14.0, 1e-12);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(fading_pdf(f, 0.0), Error);
    CHECK_THROWS_AS(fading_pdf({0.0, 0.0}, 1.0), Error);
  }

  TEST_CASE("scintillation index") {
    CHECK(scintillation_index({0.0, 1.4}) == doctest::Approx(6.099327065156631).epsilon(1e-14));
    CHECK(scintillation_index({0.0, 0.0}) == 0.0);
    CHECK(scintillation_index({4.7, 1.4}) == scintillation_index({-3.0, 1.4}));
  }

  TEST_CASE("transmissivity factor has unit mean and the model SI") {
    const FadingModel f{4.7, 0.8};
    Rng rng = make_rng(3, 0, 0);
    const int n = 1'000'000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = sample_transmissivity_factor(f, rng);
      s += x;
      s2 += x * x;
    }
    const double mean = s / n;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
    CHECK((s2 / n - mean * mean) / (mean * mean) == doctest::Approx(scintillation_index(f)).epsilon(0.1));
    CHECK(sample_transmissivity_factor(FadingModel{0.0, 0.0}, rng) == 1.0);
  }

  TEST_CASE("scenario projection") {
    ScenarioChanges c;
    c.diffraction_gain_db = 20.0;
    c.eta_rx_new = 1.0;
    c.mu_sat_new = 1.0;
    const auto p = project_scenario(measured_base(), c);
    CHECK(p.rate_cps == doctest::Approx(10096.15).epsilon(1e-5));
    CHECK(p.snr == doctest::Approx(336.54).epsilon(1e-4));

    const auto id = project_scenario(measured_base(), {});
    CHECK(id.rate_cps == 210.0);
    CHECK(id.snr == 7.0);

    ScenarioChanges ten;
    ten.diffraction_gain_db = 10.0;
    const auto t = project_scenario(measured_base(), ten);
    CHECK(t.rate_cps == doctest::Approx(2100.0));
    CHECK(t.snr == doctest::Approx(70.0));

    c.background = BackgroundMode::scales_with_eta_rx;
    const auto s = project_scenario(measured_base(), c);
    CHECK(s.rate_cps == doctest::Approx(p.rate_cps));
    CHECK(s.snr == doctest::Approx(p.snr * 0.13));
  }

  TEST_CASE("scenarios compose in dark-dominated mode") {
    ScenarioChanges a, b, ab;
    a.diffraction_gain_db = 6.0;
    a.eta_rx_new = 0.5;
    b.diffraction_gain_db = 14.0;
    b.mu_sat_new = 4.0;
    const auto first = project_scenario(measured_base(), a);
    const auto second = project_scenario({first.rate_cps, first.snr, 16.0, 0.5}, b);
    ab.diffraction_gain_db = 20.0;
    ab.eta_rx_new = 0.5;
    ab.mu_sat_new = 4.0;
    const auto combined = project_scenario(measured_base(), ab);
    CHECK(second.rate_cps == doctest::Approx(combined.rate_cps).epsilon(1e-12));
    CHECK(second.snr == doctest::Approx(combined.snr).epsilon(1e-12));
  }

  TEST_CASE("nonpositive scenario ratios are rejected") {
    ScenarioChanges c;
    c.mu_sat_new = 0.0;
    try {
      project_scenario(measured_base(), c);
      FAIL("expected InvalidScenario");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_scenario);
      CHECK(static_cast<int>(e.category()) == 2);
    }
    c.mu_sat_new.reset();
    c.eta_rx_new = -0.1;
    CHECK_THROWS_AS(project_scenario(measured_base(), c), Error);
  }
}
