#include <cstdio>

#include "ccid/protocol_sim.hpp"

int main() {
  ccid::LinkConfig link;
  const auto t = ccid::sim::simulate_flow(ccid::ProtocolLabel::Reno, link, 1'000'000);
  std::printf("%zu records\n", t.records.size());
  return t.completed ? 0 : 1;
}
