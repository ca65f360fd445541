// Test double for the stdio oracle protocol.
//   fake_oracle echo <anchor>   answers every request with that anchor
//   fake_oracle first           answers with the first offered category
//   fake_oracle garbage         answers with a line that is not JSON
//   fake_oracle silent          reads requests and never answers
//   fake_oracle log <file>      like "first", appending each request to <file>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include "json.hpp"

int main(int argc, char** argv) {
    const std::string mode = argc > 1 ? argv[1] : "first";
    std::string line;
    while (std::getline(std::cin, line)) {
        if (mode == "silent") {
            std::this_thread::sleep_for(std::chrono::seconds(30));
            continue;
        }
        if (mode == "garbage") {
            std::cout << "this is not json" << std::endl;
            continue;
        }
        const auto req = nlohmann::json::parse(line);
        if (mode == "log" && argc > 2) std::ofstream(argv[2], std::ios::app) << line << '\n';
        std::string anchor = mode == "echo" && argc > 2 ? argv[2] : "";
        if (anchor.empty() && !req.at("categories").empty()) anchor = req.at("categories")[0].get<std::string>();
        nlohmann::json resp = {{"anchor", anchor}, {"chain", {anchor}}, {"scores", {{anchor, 0.9}}}};
        std::cout << resp.dump() << std::endl;
    }
}
