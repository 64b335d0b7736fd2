#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "hdp/metrics.hpp"
#include "hdp/random.hpp"

using namespace hdp::metrics;

namespace {

ConfusionMatrix cm(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) { return {tp, tn, fp, fn}; }

}  // namespace

TEST_CASE("confusion tallies") {
  const std::vector<int> p{1, 1, 0, 0};
  CHECK(confusion(p, p) == cm(2, 2, 0, 0));
  const std::vector<int> ones(5, 1), zeros(5, 0);
  CHECK(confusion(ones, zeros) == cm(0, 0, 5, 0));
  CHECK(confusion(zeros, ones) == cm(0, 0, 0, 5));
  CHECK_THROWS_AS(confusion(p, ones), MetricsError);
  CHECK_THROWS_AS(confusion(std::vector<int>{}, std::vector<int>{}), MetricsError);
  CHECK_THROWS_AS(confusion(std::vector<int>{2}, std::vector<int>{1}), MetricsError);

  hdp::Rng rng(1);
  std::vector<int> a(100), b(100);
  for (int i = 0; i < 100; ++i) {
    a[i] = static_cast<int>(rng.index(2));
    b[i] = static_cast<int>(rng.index(2));
  }
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (int i = 0; i < 100; ++i) {
    if (a[i] == 1 && b[i] == 1) ++tp;
    if (a[i] == 0 && b[i] == 0) ++tn;
    if (a[i] == 1 && b[i] == 0) ++fp;
    if (a[i] == 0 && b[i] == 1) ++fn;
  }
  CHECK(confusion(a, b) == cm(tp, tn, fp, fn));
}

TEST_CASE("worked example") {
  const auto r = compute_metrics(cm(50, 30, 10, 10));
  CHECK(*r.accuracy == doctest::Approx(0.8).epsilon(1e-4));
  CHECK(*r.ppv == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(*r.npv == doctest::Approx(0.75).epsilon(1e-4));
  CHECK(*r.sensitivity == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(*r.specificity == doctest::Approx(0.75).epsilon(1e-4));
  CHECK(*r.f1 == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(*r.prevalence == doctest::Approx(0.6));
  CHECK(*r.error == doctest::Approx(0.2));

  const auto perfect = compute_metrics(cm(10, 10, 0, 0));
  CHECK(*perfect.accuracy == 1.0);
  CHECK(*perfect.f1 == 1.0);
  CHECK(*perfect.specificity == 1.0);
}

TEST_CASE("accuracy and error are complements") {
  // 982 correct of 1000.
  const auto r = compute_metrics(cm(491, 491, 9, 9));
  CHECK(*r.accuracy == doctest::Approx(0.982));
  CHECK(*r.error == doctest::Approx(0.018));
}

TEST_CASE("zero denominators are undefined, not zero") {
  const auto r = compute_metrics(cm(0, 5, 0, 0));
  CHECK(*r.accuracy == 1.0);
  CHECK_FALSE(r.ppv.has_value());
  CHECK_FALSE(r.sensitivity.has_value());
  CHECK_FALSE(r.f1.has_value());
  CHECK(*r.npv == 1.0);
  CHECK(*r.specificity == 1.0);
  CHECK(*r.prevalence == 0.0);
  CHECK_THROWS_AS(compute_metrics(cm(0, 0, 0, 0)), MetricsError);
}

TEST_CASE("algebraic identities over random matrices") {
  hdp::Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto m = cm(1 + rng.index(500), 1 + rng.index(500), 1 + rng.index(500), 1 + rng.index(500));
    const auto r = compute_metrics(m);
    const double dp = *r.prevalence;
    CHECK(std::abs(*r.accuracy - (*r.sensitivity * dp + *r.specificity * (1 - dp))) < 1e-12);
    CHECK(std::abs(*r.f1 - 2.0 / (1.0 / *r.ppv + 1.0 / *r.sensitivity)) < 1e-12);
    CHECK(*r.accuracy + *r.error == doctest::Approx(1.0));
  }
}

TEST_CASE("report table") {
  const auto r = compute_metrics(cm(50, 30, 10, 10));
  const auto text = report_table({{"fold 1", r}});
  std::istringstream in(text);
  std::string header, line, extra;
  std::getline(in, header);
  std::getline(in, line);
  CHECK_FALSE(std::getline(in, extra));
  CHECK(header.find("ACC") < header.find("Error"));
  CHECK(header.find("Error") < header.find("Precision"));
  CHECK(header.find("Precision") < header.find("F1"));
  CHECK(header.find("F1") < header.find("Recall"));
  CHECK(header.find("Recall") < header.find("Specificity"));
  CHECK(line.find("80.0") != std::string::npos);
  CHECK(line.find("83.3") != std::string::npos);

  const auto undefined = report_table({{"x", compute_metrics(cm(0, 5, 0, 0))}});
  CHECK(undefined.find("—") != std::string::npos);
}

TEST_CASE("report table parses back at one decimal") {
  hdp::Rng rng(3);
  std::vector<std::pair<std::string, MetricsReport>> rows;
  for (int i = 0; i < 20; ++i) {
    rows.push_back({"row" + std::to_string(i),
                    compute_metrics(cm(rng.index(50), 1 + rng.index(50), rng.index(50), rng.index(50)))});
  }
  const auto back = parse_report_table(report_table(rows));
  REQUIRE(back.size() == rows.size());
  const auto same = [](const Measure& a, const Measure& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || std::abs(*a - *b) <= 0.0005 + 1e-12;
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].first == rows[i].first);
    const auto& x = rows[i].second;
    const auto& y = back[i].second;
    CHECK(same(x.accuracy, y.accuracy));
    CHECK(same(x.error, y.error));
    CHECK(same(x.ppv, y.ppv));
    CHECK(same(x.f1, y.f1));
    CHECK(same(x.sensitivity, y.sensitivity));
    CHECK(same(x.specificity, y.specificity));
    CHECK(same(x.npv, y.npv));
    CHECK(same(x.prevalence, y.prevalence));
  }
}

TEST_CASE("key-value report") {
  const auto text = report_key_values(compute_metrics(cm(0, 5, 0, 0)), "training");
  CHECK(text.find("training.accuracy=1\n") != std::string::npos);
  CHECK(text.find("training.ppv=undefined\n") != std::string::npos);
}

TEST_CASE("prevalence sweep") {
  const std::vector<double> ps{0.1, 0.5};
  const auto s = prevalence_sweep(0.9, 0.9, ps);
  CHECK(s[1].ppv == doctest::Approx(0.9));
  CHECK(s[0].ppv == doctest::Approx(0.5));
  CHECK(s[1].npv == doctest::Approx(0.9));

  const std::vector<double> grid{0.01, 0.3, 0.77, 0.99};
  for (const auto& v : prevalence_sweep(0.6, 1.0, grid)) CHECK(v.ppv == 1.0);

  std::vector<double> fine;
  for (int i = 1; i <= 99; ++i) fine.push_back(i / 100.0);
  const auto inc = prevalence_sweep(0.7, 0.8, fine);
  for (std::size_t i = 1; i < inc.size(); ++i) {
    CHECK(inc[i].ppv > inc[i - 1].ppv);
    CHECK(inc[i].npv < inc[i - 1].npv);
  }
  CHECK_THROWS_AS(prevalence_sweep(0.9, 0.9, std::vector<double>{0.0}), MetricsError);
  CHECK_THROWS_AS(prevalence_sweep(0.9, 0.9, std::vector<double>{1.0}), MetricsError);
  CHECK_THROWS_AS(prevalence_sweep(0.0, 0.9, std::vector<double>{0.5}), MetricsError);
}
