// Writes the synthetic 48-record corpus: make_corpus <dir> [beats_per_record] [seed]
#include <cstdlib>
#include <iostream>

#include "synth.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_corpus <dir> [beats_per_record] [seed]\n";
    return 2;
  }
  const std::size_t beats = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 40;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 2024;
  ecgsal::testsupport::write_corpus(argv[1], beats, seed);
  return 0;
}
