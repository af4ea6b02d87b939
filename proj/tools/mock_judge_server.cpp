// Serves a scripted judge/embedding mock until interrupted.
#include <csignal>
#include <iostream>

#include "CLI11.hpp"

#include "actionkit/error.hpp"
#include "actionkit/http.hpp"

namespace {
actionkit::MockJudgeServer* g_server = nullptr;
void on_signal(int) {
    if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scripted mock of chat-completion judges and an embedding service."};
    std::string script, host = "127.0.0.1";
    int port = 0;
    app.add_option("--script", script, "JSON script file")->required();
    app.add_option("--host", host, "Bind address")->capture_default_str();
    app.add_option("--port", port, "Port, 0 picks a free one")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        auto server = actionkit::MockJudgeServer::from_file(script);
        server.start(host, port);
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cout << server.chat_url() << '\n' << std::flush;
        server.wait();
    } catch (const actionkit::Error& e) {
        std::cerr << e.code() << ": " << e.what() << '\n';
        return 1;
    }
    return 0;
}
