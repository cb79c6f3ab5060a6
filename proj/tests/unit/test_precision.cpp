#include "doctest.h"
#include "dsq/error.hpp"
#include "dsq/precision.hpp"

using namespace dsq;

TEST_CASE("precision setups parse from widths or tokens") {
  const auto a = PrecisionConfig::parse("16,4,4,16", FormatKind::Bfp);
  CHECK(a == PrecisionConfig::of(FormatKind::Bfp, 16, 4, 4, 16));
  CHECK(PrecisionConfig::parse("[16, 4, 4, 16]", FormatKind::Bfp) == a);
  CHECK(PrecisionConfig::parse("bfp:16,bfp:4,bfp:4,bfp:16", FormatKind::Fixed) == a);
  CHECK(PrecisionConfig::parse(a.to_string(), FormatKind::Fixed) == a);
  CHECK(a.setup_string() == "[16, 4, 4, 16]");
  CHECK(a.to_string() == "bfp:16,bfp:4,bfp:4,bfp:16");
  CHECK(a[1] == NumberFormat::bfp(4));
  CHECK(a.family() == FormatKind::Bfp);
  CHECK(PrecisionConfig::reference().family() == FormatKind::Reference);
  CHECK_THROWS_AS(PrecisionConfig::parse("16,4,4", FormatKind::Bfp), ConfigError);
  CHECK_THROWS_AS(PrecisionConfig::parse("16,4,4,16,16", FormatKind::Bfp), ConfigError);
  CHECK_THROWS_AS(PrecisionConfig::parse("16,4,1,16", FormatKind::Fixed), ConfigError);
  CHECK_THROWS_AS(a[4], ContractViolation);
}

TEST_CASE("families may not be mixed, Reference points may") {
  const PrecisionConfig mixed{NumberFormat::fixed(16), NumberFormat::bfp(4), NumberFormat::bfp(4),
                              NumberFormat::fixed(16)};
  CHECK_THROWS_AS(validate(mixed), ConfigError);
  const PrecisionConfig with_ref{NumberFormat::reference(), NumberFormat::bfp(4), NumberFormat::reference(),
                                 NumberFormat::bfp(16)};
  CHECK_NOTHROW(validate(with_ref));
  CHECK(with_ref.family() == FormatKind::Bfp);
}

TEST_CASE("family names") {
  CHECK(parse_family("fixed") == FormatKind::Fixed);
  CHECK(parse_family("bfp") == FormatKind::Bfp);
  CHECK(parse_family("ref") == FormatKind::Reference);
  CHECK(family_name(FormatKind::Bfp) == "bfp");
  CHECK_THROWS_AS(parse_family("posit"), ConfigError);
}
