#ifndef STREAK_TESTS_FIXTURES_HPP
#define STREAK_TESTS_FIXTURES_HPP

#include <string>

namespace testsupport {

// Ten reified statements about wine regions and rivers: two spatial entities,
// reused fact ids, a higher-order statement on a fact id, and placeholder
// object tokens. Mirrors the running-example knowledge snippet.
inline const char* kWineSample = R"TTL(@prefix xsd: <http://www.w3.org/2001/XMLSchema#>.
#@ <id1>
:Mosel :grapeVariety :Albalonga.
#@ <id2>
:Mosel :soilType :porus_slate.
#@ <id3>
:Mosel :hasProduction "4500000000"^^xsd:double.
#@ <id4>
:Mosel :hasGeometry "POINT(28.6,77.2)".
#@ <id4>
:Moselle :pollutedBy :pesticide.
#@ <id5>
<id4> :includes ?pest.
#@ <id6>
?pest :concentration ?c.
#@ <id7>
:Moselle :hasMouth :Rhine.
#@ <id8>
:Moselle :source :Vosges_mountains.
#@ <id8>
:Moselle :hasGeometry "LINESTRING((28.3,77.5),(28.4,77.6))".
)TTL";

// Same shape but with a numeric concentration so ranking has both factors.
inline const char* kWineSampleNumeric = R"TTL(@prefix xsd: <http://www.w3.org/2001/XMLSchema#>.
#@ <id1>
:Mosel :grapeVariety :Albalonga.
#@ <id2>
:Mosel :soilType :porus_slate.
#@ <id3>
:Mosel :hasProduction "4500000000"^^xsd:double.
#@ <id4>
:Mosel :hasGeometry "POINT(28.6,77.2)".
#@ <id4>
:Moselle :pollutedBy :pesticide.
#@ <id5>
<id4> :includes :ddt.
#@ <id6>
:ddt :concentration "0.9"^^xsd:double.
#@ <id7>
:Moselle :hasMouth :Rhine.
#@ <id8>
:Moselle :source :Vosges_mountains.
#@ <id8>
:Moselle :hasGeometry "LINESTRING((28.3,77.5),(28.4,77.6))".
)TTL";

}  // namespace testsupport

#endif
